#include "pyrafove/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pyrafove/errors.hpp"

namespace pyrafove {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void Table::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns_.size()) throw ShapeError("table row has the wrong number of cells");
  rows_.push_back(std::move(cells));
}

std::string Table::csv() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < columns_.size(); ++i) out << (i ? "," : "") << columns_[i];
  out << '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
  return out.str();
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Round step to 1, 2 or 5 times a power of ten.
double nice_step(double span, int target) {
  const double raw = span / std::max(target, 1);
  const double p = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * p >= raw) return m * p;
  return 10.0 * p;
}

}  // namespace

std::string render_svg(const Plot& plot) {
  const double W = 640, H = 420, L = 70, R = 160, T = 40, B = 60;
  double x0 = HUGE_VAL, x1 = -HUGE_VAL, y0 = HUGE_VAL, y1 = -HUGE_VAL;
  for (const auto& s : plot.series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (plot.reference_y) {
    y0 = std::min(y0, *plot.reference_y);
    y1 = std::max(y1, *plot.reference_y);
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double xs = nice_step(x1 - x0, 6), ys = nice_step(y1 - y0, 6);
  x0 = std::floor(x0 / xs) * xs;
  x1 = std::ceil(x1 / xs) * xs;
  y0 = std::floor(y0 / ys) * ys;
  y1 = std::ceil(y1 / ys) * ys;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fmt(W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(plot.title) << "</text>\n";
  for (double t = x0; t <= x1 + 1e-9 * xs; t += xs) {
    o << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << fmt(H - B) << "\" x2=\"" << fmt(px(t))
      << "\" y2=\"" << fmt(T) << "\" stroke=\"#eee\"/>\n";
    o << "<text x=\"" << fmt(px(t)) << "\" y=\"" << fmt(H - B + 16)
      << "\" text-anchor=\"middle\">" << tick_label(std::fabs(t) < 1e-12 * xs ? 0.0 : t) << "</text>\n";
  }
  for (double t = y0; t <= y1 + 1e-9 * ys; t += ys) {
    o << "<line x1=\"" << fmt(L) << "\" y1=\"" << fmt(py(t)) << "\" x2=\"" << fmt(W - R)
      << "\" y2=\"" << fmt(py(t)) << "\" stroke=\"#eee\"/>\n";
    o << "<text x=\"" << fmt(L - 6) << "\" y=\"" << fmt(py(t) + 4) << "\" text-anchor=\"end\">"
      << tick_label(std::fabs(t) < 1e-12 * ys ? 0.0 : t) << "</text>\n";
  }
  o << "<rect x=\"" << fmt(L) << "\" y=\"" << fmt(T) << "\" width=\"" << fmt(W - L - R)
    << "\" height=\"" << fmt(H - T - B) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  o << "<text x=\"" << fmt(L + (W - L - R) / 2) << "\" y=\"" << fmt(H - 18)
    << "\" text-anchor=\"middle\">" << escape(plot.x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << fmt(T + (H - T - B) / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape(plot.y_label) << "</text>\n";
  if (plot.reference_y) {
    o << "<line x1=\"" << fmt(L) << "\" y1=\"" << fmt(py(*plot.reference_y)) << "\" x2=\""
      << fmt(W - R) << "\" y2=\"" << fmt(py(*plot.reference_y))
      << "\" stroke=\"#888\" stroke-dasharray=\"5,4\"/>\n";
  }
  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const Series& s = plot.series[k];
    const char* c = colors[k % 6];
    std::ostringstream pts;
    bool any = false;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      pts << (any ? " " : "") << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i]));
      any = true;
    }
    if (s.line && any)
      o << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << c
        << "\" stroke-width=\"1.5\"/>\n";
    if (s.markers)
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        o << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i]))
          << "\" r=\"3\" fill=\"" << c << "\"/>\n";
      }
    const double ly = T + 14 + 18 * static_cast<double>(k);
    o << "<line x1=\"" << fmt(W - R + 10) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
      << fmt(W - R + 30) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << c
      << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << fmt(W - R + 36) << "\" y=\"" << fmt(ly) << "\">" << escape(s.label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace pyrafove
