#include "pyrafove/templates.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "pyrafove/errors.hpp"
#include "pyrafove/hash.hpp"

namespace pyrafove {

double nyquist_pixels_per_degree(AngularLength s, double wavelength_ratio) {
  return 2.0 * 3600.0 / (wavelength_ratio * s.arcsec());
}

std::vector<double> FilterKernel::dense(bool odd_phase) const {
  const int n = 2 * radius_px + 1;
  std::vector<double> grid(static_cast<std::size_t>(n) * n, 0.0);
  const auto& w = odd_phase ? odd : even;
  for (std::size_t i = 0; i < w.size(); ++i)
    grid[static_cast<std::size_t>(dv[i] + radius_px) * n + (du[i] + radius_px)] = w[i];
  return grid;
}

FilterKernel make_gabor(const GaborParams& params, double pixels_per_degree) {
  if (!(params.s.arcsec() > 0.0)) throw ParameterError("Gabor radius must be positive");
  if (!(params.wavelength_ratio > 0.0) || !(params.sigma_ratio > 0.0))
    throw ParameterError("Gabor wavelength and sigma ratios must be positive");
  if (!(pixels_per_degree > 0.0)) throw ParameterError("pixels_per_degree must be positive");

  FilterKernel k;
  k.params = params;
  k.pixels_per_degree = pixels_per_degree;
  k.s_px = params.s.pixels(pixels_per_degree);
  const double lambda_px = params.wavelength_ratio * k.s_px;
  const double min_ppd = nyquist_pixels_per_degree(params.s, params.wavelength_ratio);
  if (lambda_px < 2.0 - 1e-9) {
    std::ostringstream msg;
    msg << "wavelength " << lambda_px << " px is below the Nyquist limit for s = "
        << params.s.arcsec() << "\"; needs at least " << min_ppd << " px/deg";
    throw ResolutionError(msg.str(), min_ppd);
  }
  const double sigma_px = params.sigma_ratio * k.s_px;
  k.radius_px = static_cast<int>(std::floor(k.s_px + 1e-9));
  const double r2 = k.s_px * k.s_px + 1e-9;
  const double c = std::cos(params.theta);
  const double s = std::sin(params.theta);
  for (int v = -k.radius_px; v <= k.radius_px; ++v) {
    for (int u = -k.radius_px; u <= k.radius_px; ++u) {
      const double d2 = static_cast<double>(u) * u + static_cast<double>(v) * v;
      if (d2 > r2) continue;
      // v grows downward on screen, so the on-screen angle flips its sign.
      const double proj = u * c - v * s;
      const double env = std::exp(-d2 / (2.0 * sigma_px * sigma_px));
      const double phase = 2.0 * std::numbers::pi * proj / lambda_px;
      k.du.push_back(u);
      k.dv.push_back(v);
      k.even.push_back(env * std::cos(phase));
      k.odd.push_back(env * std::sin(phase));
    }
  }
  for (auto* w : {&k.even, &k.odd}) {
    double mean = 0.0;
    for (double x : *w) mean += x;
    mean /= static_cast<double>(w->size());
    double norm = 0.0;
    for (double& x : *w) {
      x -= mean;
      norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-9) {
      std::ostringstream msg;
      msg << "kernel phase vanishes for s = " << params.s.arcsec()
          << "\" at the sampling limit; raise pixels_per_degree above " << min_ppd;
      throw ResolutionError(msg.str(), min_ppd);
    }
    for (double& x : *w) x /= norm;
  }
  return k;
}

double TemplateBank::orientation(int j) const { return j * std::numbers::pi / n_theta; }

std::string TemplateBank::to_json() const {
  nlohmann::json j;
  std::vector<double> radii;
  for (const auto& b : bands) radii.push_back(b.radius.arcsec());
  j["band_radii_arcsec"] = radii;
  j["n_theta"] = n_theta;
  j["wavelength_ratio"] = defaults.wavelength_ratio;
  j["sigma_ratio"] = defaults.sigma_ratio;
  j["pixels_per_degree"] = pixels_per_degree;
  j["contrast_floor"] = contrast_floor;
  return j.dump();
}

std::string TemplateBank::hash() const { return hex64(fnv1a64(to_json())); }

TemplateBank make_bank(const LatticeSpec& spec, int n_theta, const GaborParams& defaults,
                       double pixels_per_degree, double contrast_floor) {
  spec.validate();
  if (n_theta < 1) throw ParameterError("n_theta must be at least 1");
  if (contrast_floor < 0.0) throw ParameterError("contrast_floor must be non-negative");
  TemplateBank bank;
  bank.bands = spec.ladder();
  bank.n_theta = n_theta;
  bank.defaults = defaults;
  bank.pixels_per_degree = pixels_per_degree;
  bank.contrast_floor = contrast_floor;
  for (const auto& band : bank.bands) {
    for (int j = 0; j < n_theta; ++j) {
      GaborParams p = defaults;
      p.s = band.radius;
      p.theta = bank.orientation(j);
      try {
        bank.kernels.push_back(make_gabor(p, pixels_per_degree));
      } catch (const ResolutionError& e) {
        throw ResolutionError("band " + std::to_string(band.index) + ": " + e.what(),
                              e.min_pixels_per_degree());
      }
    }
  }
  return bank;
}

ResponseEvaluator::ResponseEvaluator(const RetinalImage& image, const TemplateBank& bank,
                                     bool fast)
    : image_(image), bank_(bank), fast_(fast) {
  image.validate();
  if (!fast_) return;
  const Image& img = image.pixels;
  pw_ = img.width + 2;
  ph_ = img.height + 2;
  auto padded = [&](int x, int y) { return img.get(x - 1, y - 1); };
  const int sw = pw_ + 1;
  h_diff_.assign(static_cast<std::size_t>(sw) * (ph_ + 1), 0);
  v_diff_.assign(h_diff_.size(), 0);
  for (int y = 0; y < ph_; ++y) {
    for (int x = 0; x < pw_; ++x) {
      const double p = padded(x, y);
      const int h = (x + 1 < pw_ && padded(x + 1, y) != p) ? 1 : 0;
      const int v = (y + 1 < ph_ && padded(x, y + 1) != p) ? 1 : 0;
      const std::size_t i = static_cast<std::size_t>(y + 1) * sw + (x + 1);
      h_diff_[i] = h + h_diff_[i - 1] + h_diff_[i - sw] - h_diff_[i - sw - 1];
      v_diff_[i] = v + v_diff_[i - 1] + v_diff_[i - sw] - v_diff_[i - sw - 1];
    }
  }
}

bool ResponseEvaluator::constant_box(int x0, int y0, int x1, int y1) const {
  // Shift into padded coordinates; everything beyond the zero ring is zero too.
  x0 = std::max(x0 + 1, 0);
  y0 = std::max(y0 + 1, 0);
  x1 = std::min(x1 + 1, pw_ - 1);
  y1 = std::min(y1 + 1, ph_ - 1);
  if (x0 > x1 || y0 > y1) return true;
  const int sw = pw_ + 1;
  auto sum = [&](const std::vector<int>& t, int ax, int ay, int bx, int by) {
    if (ax > bx || ay > by) return 0;
    return t[static_cast<std::size_t>(by + 1) * sw + (bx + 1)] -
           t[static_cast<std::size_t>(ay) * sw + (bx + 1)] -
           t[static_cast<std::size_t>(by + 1) * sw + ax] + t[static_cast<std::size_t>(ay) * sw + ax];
  };
  return sum(h_diff_, x0, y0, x1 - 1, y1) == 0 && sum(v_diff_, x0, y0, x1, y1 - 1) == 0;
}

void ResponseEvaluator::evaluate(const SamplePoint& point, Response* out) const {
  evaluate_at(image_.to_px_x(point.x), image_.to_px_y(point.y), point.i_s, out);
}

void ResponseEvaluator::evaluate_at(double cx, double cy, int band, Response* out) const {
  // Lattice centers computed through arcsec round trips land within ulps of
  // whole pixels; treat those as exact.
  if (std::fabs(cx - std::round(cx)) < 1e-9) cx = std::round(cx);
  if (std::fabs(cy - std::round(cy)) < 1e-9) cy = std::round(cy);
  const int n_theta = bank_.n_theta;
  const FilterKernel& k0 = bank_.kernel(band, 0);
  const int r = k0.radius_px;
  const Image& img = image_.pixels;
  const int x0 = static_cast<int>(std::floor(cx - r));
  const int x1 = static_cast<int>(std::ceil(cx + r));
  const int y0 = static_cast<int>(std::floor(cy - r));
  const int y1 = static_cast<int>(std::ceil(cy + r));
  const bool padded = x0 < 0 || y0 < 0 || x1 > img.width - 1 || y1 > img.height - 1;
  for (int j = 0; j < n_theta; ++j) out[j] = Response{0.0, 0.0, 0.0, padded};
  if (fast_ && constant_box(x0, y0, x1, y1)) return;

  const std::size_t n = k0.size();
  thread_local std::vector<double> patch;
  patch.resize(n);
  const double fx = std::floor(cx);
  const double fy = std::floor(cy);
  if (fx == cx && fy == cy) {
    const int ix = static_cast<int>(fx);
    const int iy = static_cast<int>(fy);
    for (std::size_t i = 0; i < n; ++i) patch[i] = img.get(ix + k0.du[i], iy + k0.dv[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) patch[i] = sample_bilinear(img, cx + k0.du[i], cy + k0.dv[i]);
  }
  double mean = 0.0;
  for (double p : patch) mean += p;
  mean /= static_cast<double>(n);
  double norm2 = 0.0;
  for (double& p : patch) {
    p -= mean;
    norm2 += p * p;
  }
  const double floor_norm = std::max(1e-8, bank_.contrast_floor * std::sqrt(static_cast<double>(n)));
  const double denom = std::max(std::sqrt(norm2), floor_norm);
  for (int j = 0; j < n_theta; ++j) {
    const FilterKernel& k = bank_.kernel(band, j);
    double re = 0.0;
    double ro = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      re += k.even[i] * patch[i];
      ro += k.odd[i] * patch[i];
    }
    re /= denom;
    ro /= denom;
    out[j].even = re;
    out[j].odd = ro;
    out[j].energy = std::sqrt(re * re + ro * ro);
  }
}

Response respond_detail(const RetinalImage& image, const SamplePoint& point,
                        const TemplateBank& bank, int orientation) {
  if (orientation < 0 || orientation >= bank.n_theta)
    throw ParameterError("orientation index out of range");
  if (point.i_s < 0 || point.i_s >= static_cast<int>(bank.bands.size()))
    throw BandLookupError("sample point band is not in the bank");
  ResponseEvaluator ev(image, bank, false);
  std::vector<Response> out(bank.n_theta);
  ev.evaluate(point, out.data());
  return out[orientation];
}

double respond(const RetinalImage& image, const SamplePoint& point, const TemplateBank& bank,
               int orientation) {
  return respond_detail(image, point, bank, orientation).energy;
}

std::string kernel_csv(const FilterKernel& k, bool odd_phase) {
  const auto grid = k.dense(odd_phase);
  const int n = 2 * k.radius_px + 1;
  std::ostringstream out;
  out.precision(9);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (x) out << ',';
      out << grid[static_cast<std::size_t>(y) * n + x];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace pyrafove
