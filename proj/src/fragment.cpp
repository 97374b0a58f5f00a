#include "pyrafove/fragment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pyrafove/errors.hpp"
#include "pyrafove/parallel.hpp"

namespace pyrafove {

namespace {

constexpr char kMagic[8] = {'P', 'Y', 'R', 'A', 'F', 'O', 'V', 'E'};
constexpr int kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

LatticeTensor::LatticeTensor(int n_s_, int width_, int height_, int channels_)
    : n_s(n_s_), width(width_), height(height_), channels(channels_) {
  const std::size_t n = static_cast<std::size_t>(n_s) * width * height * channels;
  values.assign(n, 0.0);
  flags.assign(n, 0);
}

IPFragment extract(const RetinalImage& image, const LatticeSpec& spec, const TemplateBank& bank,
                   const ExtractOptions& options) {
  spec.validate();
  image.validate();
  const auto ladder = spec.ladder();
  if (ladder.size() != bank.bands.size())
    throw ConfigError("template bank does not match the lattice bands");
  for (std::size_t i = 0; i < ladder.size(); ++i)
    if (std::fabs(ladder[i].radius / bank.bands[i].radius - 1.0) > 1e-9)
      throw ConfigError("template bank radius differs from lattice band " + std::to_string(i));
  if (std::fabs(image.pixels_per_degree / bank.pixels_per_degree - 1.0) > 1e-12)
    throw ConfigError("image and template bank disagree on pixels_per_degree");

  const bool two_d = spec.dimensionality == Dimensionality::TwoD;
  const int w = spec.width();
  const int h = two_d ? w : 1;
  const int n_theta = bank.n_theta;
  const int n_s = static_cast<int>(ladder.size());

  IPFragment f;
  f.data = LatticeTensor(n_s, w, h, n_theta);
  f.n_x = spec.n_x;
  f.two_d = two_d;
  f.spec_hash = spec.hash();
  f.bank_hash = bank.hash();
  f.fixation_x = image.fixation_x;
  f.fixation_y = image.fixation_y;
  f.pixels_per_degree = image.pixels_per_degree;
  for (const auto& b : ladder) f.band_radii_arcsec.push_back(b.radius.arcsec());

  std::vector<char> active(n_s, options.bands.empty() ? 1 : 0);
  for (int b : options.bands) {
    if (b < 0 || b >= n_s) throw ParameterError("extract: band index out of range");
    active[b] = 1;
  }

  ResponseEvaluator ev(image, bank, options.fast);
  // One work item per (band, column).
  parallel_for(n_s * w, options.threads, [&](int item) {
    const int b = item / w;
    const int col = item % w;
    const int i_x = col - spec.n_x;
    const AngularLength s = ladder[b].radius;
    std::vector<Response> resp(n_theta);
    for (int row = 0; row < h; ++row) {
      const int i_y = two_d ? row - spec.n_x : 0;
      const SamplePoint p{b, i_x, i_y, s * static_cast<double>(i_x), s * static_cast<double>(i_y), s};
      const bool inside = active[b] && (two_d ? in_region(p.x, p.y, s, spec) : in_region(p.x, s, spec));
      const std::size_t base = f.data.index(b, col, row, 0);
      if (!inside) {
        for (int t = 0; t < n_theta; ++t) f.data.flags[base + t] = 1;
        continue;
      }
      ev.evaluate(p, resp.data());
      for (int t = 0; t < n_theta; ++t) {
        f.data.values[base + t] = resp[t].energy;
        f.data.flags[base + t] = resp[t].padded ? 1 : 0;
      }
    }
  });
  return f;
}

std::vector<double> default_band_weights(int n_s) {
  std::vector<double> w(n_s);
  double total = 0.0;
  for (int i = 0; i < n_s; ++i) total += (w[i] = std::ldexp(1.0, -i));
  for (double& x : w) x /= total;
  return w;
}

double fragment_similarity(const IPFragment& a, const IPFragment& b,
                           const std::vector<double>& weights) {
  if (!a.data.same_shape(b.data)) throw ShapeError("fragment shapes differ");
  if (static_cast<int>(weights.size()) != a.data.n_s)
    throw ShapeError("band weight count differs from the band count");
  const std::size_t per_band = a.data.size() / static_cast<std::size_t>(std::max(a.data.n_s, 1));
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (int s = 0; s < a.data.n_s; ++s) {
    const double w = weights[s];
    if (w < 0.0) throw ParameterError("band weights must be non-negative");
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    const std::size_t off = s * per_band;
    for (std::size_t i = 0; i < per_band; ++i) {
      const double x = a.data.values[off + i];
      const double y = b.data.values[off + i];
      sab += x * y;
      saa += x * x;
      sbb += y * y;
    }
    ab += w * sab;
    aa += w * saa;
    bb += w * sbb;
  }
  if (aa <= 0.0 || bb <= 0.0) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

double fragment_similarity(const IPFragment& a, const IPFragment& b) {
  return fragment_similarity(a, b, default_band_weights(a.data.n_s));
}

namespace {

IPFragment move_entries(const IPFragment& f, int ds, int dx, int dy) {
  IPFragment out = f;
  const LatticeTensor& src = f.data;
  LatticeTensor& dst = out.data;
  for (int s = 0; s < dst.n_s; ++s) {
    for (int x = 0; x < dst.width; ++x) {
      for (int y = 0; y < dst.height; ++y) {
        const int ss = s - ds;
        const int sx = x - dx;
        const int sy = y - dy;
        const bool ok = ss >= 0 && ss < src.n_s && sx >= 0 && sx < src.width && sy >= 0 &&
                        sy < src.height;
        for (int c = 0; c < dst.channels; ++c) {
          const std::size_t i = dst.index(s, x, y, c);
          if (ok) {
            const std::size_t j = src.index(ss, sx, sy, c);
            dst.values[i] = src.values[j];
            dst.flags[i] = src.flags[j];
          } else {
            dst.values[i] = 0.0;
            dst.flags[i] = 1;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

IPFragment shift_fragment(const IPFragment& f, int di_x, int di_y) {
  return move_entries(f, 0, di_x, f.two_d ? di_y : 0);
}

IPFragment scale_shift_fragment(const IPFragment& f, int di_s) { return move_entries(f, di_s, 0, 0); }

std::string serialize_fragment(const IPFragment& f, const std::optional<StageAnnotation>& stage) {
  nlohmann::json h;
  h["format"] = "pyrafove-fragment";
  h["version"] = kFormatVersion;
  h["spec_hash"] = f.spec_hash;
  h["bank_hash"] = f.bank_hash;
  h["shape"] = {f.data.n_s, f.data.width, f.data.height, f.data.channels};
  h["n_x"] = f.n_x;
  h["two_d"] = f.two_d;
  h["fixation_arcsec"] = {f.fixation_x.arcsec(), f.fixation_y.arcsec()};
  h["pixels_per_degree"] = f.pixels_per_degree;
  h["band_radii_arcsec"] = f.band_radii_arcsec;
  if (stage) {
    h["stage"] = stage->stage;
    h["spacing_arcsec"] = stage->spacing_arcsec;
  }
  const std::string header = h.dump();
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  for (double v : f.data.values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  std::string bits((f.data.flags.size() + 7) / 8, '\0');
  for (std::size_t i = 0; i < f.data.flags.size(); ++i)
    if (f.data.flags[i]) bits[i / 8] = static_cast<char>(bits[i / 8] | (1 << (i % 8)));
  out += bits;
  return out;
}

IPFragment deserialize_fragment(const std::string& bytes, std::optional<StageAnnotation>* stage) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw IoError("not a fragment container");
  const std::uint32_t hlen = get_u32(p + 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(hlen)) throw IoError("truncated fragment header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(12, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad fragment header: ") + e.what());
  }
  IPFragment f;
  try {
    if (h.at("format") != "pyrafove-fragment") throw IoError("unknown container format");
    if (h.at("version").get<int>() != kFormatVersion) throw IoError("unsupported container version");
    const auto shape = h.at("shape").get<std::vector<int>>();
    if (shape.size() != 4) throw IoError("fragment shape must have 4 axes");
    for (int d : shape)
      if (d < 0 || d > (1 << 20)) throw IoError("fragment shape out of range");
    f.data = LatticeTensor(shape[0], shape[1], shape[2], shape[3]);
    f.spec_hash = h.at("spec_hash").get<std::string>();
    f.bank_hash = h.at("bank_hash").get<std::string>();
    f.n_x = h.at("n_x").get<int>();
    f.two_d = h.at("two_d").get<bool>();
    const auto fix = h.at("fixation_arcsec").get<std::vector<double>>();
    if (fix.size() != 2) throw IoError("fixation must have two coordinates");
    f.fixation_x = AngularLength::from_arcsec(fix[0]);
    f.fixation_y = AngularLength::from_arcsec(fix[1]);
    f.pixels_per_degree = h.at("pixels_per_degree").get<double>();
    f.band_radii_arcsec = h.at("band_radii_arcsec").get<std::vector<double>>();
    if (stage) {
      if (h.contains("stage")) {
        *stage = StageAnnotation{h.at("stage").get<int>(),
                                 h.at("spacing_arcsec").get<std::vector<double>>()};
      } else {
        stage->reset();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad fragment header field: ") + e.what());
  }
  const std::size_t n = f.data.size();
  const std::size_t need = 12 + hlen + 4 * n + (n + 7) / 8;
  if (bytes.size() != need) throw IoError("fragment payload size does not match its header");
  const unsigned char* payload = p + 12 + hlen;
  for (std::size_t i = 0; i < n; ++i)
    f.data.values[i] = std::bit_cast<float>(get_u32(payload + 4 * i));
  const unsigned char* bits = payload + 4 * n;
  for (std::size_t i = 0; i < n; ++i) f.data.flags[i] = (bits[i / 8] >> (i % 8)) & 1;
  return f;
}

void write_fragment(const IPFragment& f, const std::string& path,
                    const std::optional<StageAnnotation>& stage) {
  const std::string bytes = serialize_fragment(f, stage);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

IPFragment read_fragment(const std::string& path, std::optional<StageAnnotation>* stage) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_fragment(ss.str(), stage);
}

std::string fragment_csv(const IPFragment& f) {
  std::ostringstream out;
  out.precision(9);
  out << "i_s,i_x,i_y,theta,value,flag\n";
  const LatticeTensor& t = f.data;
  for (int s = 0; s < t.n_s; ++s)
    for (int x = 0; x < t.width; ++x)
      for (int y = 0; y < t.height; ++y)
        for (int c = 0; c < t.channels; ++c) {
          const std::size_t i = t.index(s, x, y, c);
          out << s << ',' << x - f.n_x << ',' << (f.two_d ? y - f.n_x : 0) << ',' << c << ','
              << t.values[i] << ',' << static_cast<int>(t.flags[i]) << '\n';
        }
  return out.str();
}

}  // namespace pyrafove
