#include "pyrafove/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

#include "pyrafove/errors.hpp"
#include "pyrafove/hash.hpp"

namespace pyrafove {

namespace {

constexpr double kRelTol = 1e-9;

bool le_tol(double a, double b) { return a <= b + kRelTol * std::max(std::fabs(b), 1.0); }
bool ge_tol(double a, double b) { return a >= b - kRelTol * std::max(std::fabs(b), 1.0); }

// Eccentricity / band membership shared by the 1D and 2D entry points.
bool region_contains(double ecc, double s, const LatticeSpec& spec) {
  const double s_min = spec.s_min().arcsec();
  if (spec.region == Region::TruncatedPyramid) {
    return ge_tol(s, s_min) && le_tol(s, spec.s_max().arcsec()) && le_tol(ecc, spec.n_x * s);
  }
  const auto ladder = spec.ladder();
  const double lo = std::max(s_min, ecc / spec.n_x);
  int k_min = -1;
  for (const auto& b : ladder) {
    if (ge_tol(b.radius.arcsec(), lo)) {
      k_min = b.index;
      break;
    }
  }
  if (k_min < 0) return false;
  const int top = std::min(k_min + spec.n_s() - 1, static_cast<int>(ladder.size()) - 1);
  return ge_tol(s, lo) && le_tol(s, ladder[top].radius.arcsec());
}

}  // namespace

std::string to_string(Region r) {
  return r == Region::TruncatedPyramid ? "truncated-pyramid" : "constant-difference";
}

std::string to_string(Dimensionality d) { return d == Dimensionality::OneD ? "1d" : "2d"; }

Region region_from_string(const std::string& s) {
  if (s == "truncated-pyramid") return Region::TruncatedPyramid;
  if (s == "constant-difference") return Region::ConstantDifference;
  throw ConfigError("unknown region '" + s + "' (expected truncated-pyramid or constant-difference)");
}

Dimensionality dimensionality_from_string(const std::string& s) {
  if (s == "1d") return Dimensionality::OneD;
  if (s == "2d") return Dimensionality::TwoD;
  throw ConfigError("unknown dimensionality '" + s + "' (expected 1d or 2d)");
}

void LatticeSpec::validate() const {
  if (bands.empty()) throw ParameterError("lattice needs at least one scale band");
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (bands[i].index != static_cast<int>(i))
      throw ParameterError("band indices must run 0..n_s-1 in order");
    if (!(bands[i].radius.arcsec() > 0.0)) throw ParameterError("band radius must be positive");
    if (i > 0 && !(bands[i].radius > bands[i - 1].radius))
      throw ParameterError("band radii must be strictly increasing");
  }
  if (!(slope_a > 0.0)) throw ParameterError("slope a must be positive");
  if (n_x < 1) throw ParameterError("n_x must be at least 1");
  if (extended_bands < 0) throw ParameterError("extended_bands must be non-negative");
  if (geometric_factor) {
    const double f = *geometric_factor;
    if (!(f > 1.0)) throw ParameterError("geometric factor must exceed 1");
    for (std::size_t i = 1; i < bands.size(); ++i) {
      const double ratio = bands[i].radius / bands[i - 1].radius;
      if (std::fabs(ratio / f - 1.0) > 1e-9)
        throw ParameterError("band ratio does not match the geometric factor");
    }
  }
}

std::vector<ScaleBand> LatticeSpec::ladder() const {
  std::vector<ScaleBand> out = bands;
  if (region != Region::ConstantDifference || bands.empty()) return out;
  double ratio = 2.0;
  if (geometric_factor) {
    ratio = *geometric_factor;
  } else if (bands.size() >= 2) {
    ratio = bands.back().radius / bands[bands.size() - 2].radius;
  }
  for (int k = 0; k < extended_bands; ++k) {
    const ScaleBand& last = out.back();
    out.push_back({last.index + 1, last.radius * ratio});
  }
  return out;
}

std::string LatticeSpec::to_json() const {
  nlohmann::json j;
  std::vector<double> diam;
  for (const auto& b : bands) diam.push_back(b.diameter().arcsec());
  j["bands_arcsec_diameter"] = diam;
  j["slope_a"] = slope_a;
  j["n_x"] = n_x;
  j["region"] = to_string(region);
  j["dimensionality"] = to_string(dimensionality);
  if (geometric_factor) j["geometric_factor"] = *geometric_factor;
  j["radial"] = radial;
  j["extended_bands"] = extended_bands;
  return j.dump();
}

LatticeSpec LatticeSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("lattice spec is not valid JSON: ") + e.what());
  }
  static const std::set<std::string> known = {"bands_arcsec_diameter", "slope_a", "n_x",
                                              "region", "dimensionality", "geometric_factor",
                                              "radial", "extended_bands"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown lattice key '" + it.key() + "'");
  LatticeSpec spec;
  try {
    const auto diam = j.at("bands_arcsec_diameter").get<std::vector<double>>();
    for (std::size_t i = 0; i < diam.size(); ++i)
      spec.bands.push_back({static_cast<int>(i), AngularLength::from_arcsec(diam[i] / 2.0)});
    spec.slope_a = j.value("slope_a", 0.05);
    spec.n_x = j.contains("n_x") ? j.at("n_x").get<int>() : n_x_from_slope(spec.slope_a);
    spec.region = region_from_string(j.value("region", std::string("truncated-pyramid")));
    spec.dimensionality = dimensionality_from_string(j.value("dimensionality", std::string("1d")));
    if (j.contains("geometric_factor")) spec.geometric_factor = j.at("geometric_factor").get<double>();
    spec.radial = j.value("radial", false);
    spec.extended_bands = j.value("extended_bands", 2);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad lattice field: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string LatticeSpec::hash() const { return hex64(fnv1a64(to_json())); }

int n_x_from_slope(double a) {
  if (!(a > 0.0)) throw ParameterError("slope a must be positive");
  return std::max(1, static_cast<int>(std::lround(1.0 / a)));
}

LatticeSpec make_lattice_spec(std::vector<ScaleBand> bands, double slope_a, Dimensionality dims) {
  LatticeSpec spec;
  spec.bands = std::move(bands);
  spec.slope_a = slope_a;
  spec.n_x = n_x_from_slope(slope_a);
  spec.dimensionality = dims;
  spec.validate();
  return spec;
}

std::vector<ScaleBand> marr_default_bands() {
  // Diameters 1'20", 3.1', 6.2', 11.7', 21'.
  const double diameters[] = {80.0, 186.0, 372.0, 702.0, 1260.0};
  std::vector<ScaleBand> out;
  for (int i = 0; i < 5; ++i) out.push_back({i, AngularLength::from_arcsec(diameters[i] / 2.0)});
  return out;
}

std::vector<ScaleBand> geometric_bands(AngularLength s_min, AngularLength s_max, double f) {
  if (!(s_min.arcsec() > 0.0) || !(s_min < s_max))
    throw ParameterError("geometric bands need 0 < s_min < s_max");
  if (!(f > 1.0)) throw ParameterError("geometric factor must exceed 1");
  const int count = static_cast<int>(std::floor(std::log(s_max / s_min) / std::log(f) + 1e-9)) + 1;
  std::vector<ScaleBand> out;
  for (int k = 0; k < count; ++k) out.push_back({k, s_min * std::pow(f, k)});
  return out;
}

bool in_region(AngularLength x, AngularLength s, const LatticeSpec& spec) {
  return region_contains(std::fabs(x.arcsec()), s.arcsec(), spec);
}

bool in_region(AngularLength x, AngularLength y, AngularLength s, const LatticeSpec& spec) {
  const double ax = std::fabs(x.arcsec());
  const double ay = std::fabs(y.arcsec());
  const double ecc = spec.radial ? std::hypot(ax, ay) : std::max(ax, ay);
  return region_contains(ecc, s.arcsec(), spec);
}

std::vector<SamplePoint> build_lattice(const LatticeSpec& spec) {
  spec.validate();
  const bool two_d = spec.dimensionality == Dimensionality::TwoD;
  std::vector<SamplePoint> out;
  for (const auto& band : spec.ladder()) {
    const AngularLength s = band.radius;
    for (int ix = -spec.n_x; ix <= spec.n_x; ++ix) {
      const int y_lo = two_d ? -spec.n_x : 0;
      const int y_hi = two_d ? spec.n_x : 0;
      for (int iy = y_lo; iy <= y_hi; ++iy) {
        SamplePoint p{band.index, ix, iy, s * static_cast<double>(ix), s * static_cast<double>(iy), s};
        const bool inside = two_d ? in_region(p.x, p.y, s, spec) : in_region(p.x, s, spec);
        if (inside) out.push_back(p);
      }
    }
  }
  return out;
}

std::vector<int> points_per_band(const std::vector<SamplePoint>& lattice, int n_bands) {
  std::vector<int> counts(n_bands, 0);
  for (const auto& p : lattice)
    if (p.i_s >= 0 && p.i_s < n_bands) ++counts[p.i_s];
  return counts;
}

std::optional<int> find_band(AngularLength s, const std::vector<ScaleBand>& bands) {
  for (const auto& b : bands)
    if (std::fabs(s / b.radius - 1.0) <= 1e-9) return b.index;
  return std::nullopt;
}

MagicIndex magic_map(AngularLength x, AngularLength s, const LatticeSpec& spec) {
  const auto band = find_band(s, spec.ladder());
  if (!band) throw BandLookupError("scale " + std::to_string(s.arcsec()) + "\" is not a lattice band");
  const double ratio = x / s;
  const long ix = std::lround(ratio);
  if (std::labs(ix) > spec.n_x)
    throw OutOfRegionError("position is " + std::to_string(ratio) + " samples from center, beyond n_x");
  return {*band, static_cast<int>(ix)};
}

LatticeCoord inverse_magic_map(MagicIndex idx, const LatticeSpec& spec) {
  const auto ladder = spec.ladder();
  if (idx.i_s < 0 || idx.i_s >= static_cast<int>(ladder.size()))
    throw BandLookupError("band index out of range");
  if (std::abs(idx.i_x) > spec.n_x) throw OutOfRegionError("i_x beyond n_x");
  const AngularLength s = ladder[idx.i_s].radius;
  return {s * static_cast<double>(idx.i_x), s};
}

MagicIndex shift_index(MagicIndex idx, int di_x) { return {idx.i_s, idx.i_x + di_x}; }

MagicIndex scale_shift_index(MagicIndex idx, int di_s) { return {idx.i_s + di_s, idx.i_x}; }

bool index_in_bounds(MagicIndex idx, const LatticeSpec& spec) {
  return idx.i_s >= 0 && idx.i_s < static_cast<int>(spec.ladder().size()) &&
         std::abs(idx.i_x) <= spec.n_x;
}

AngularLength infer_foveola_radius(double a, AngularLength s_min_diameter) {
  if (!(a > 0.0)) throw ParameterError("slope a must be positive");
  return s_min_diameter / a;
}

AngularLength invariance_range(AngularLength s, const LatticeSpec& spec) {
  if (!find_band(s, spec.ladder()))
    throw BandLookupError("scale " + std::to_string(s.arcsec()) + "\" is not a lattice band");
  return s * static_cast<double>(spec.n_x);
}

double empirical_inverse_magnification(AngularLength x, double m0_inv, double a_emp) {
  return m0_inv * (1.0 + a_emp * x.degrees());
}

AngularLength model_lower_boundary(AngularLength x, const LatticeSpec& spec) {
  return std::max(spec.s_min(), abs(x) * spec.boundary_slope());
}

std::optional<int> finest_covering_band(AngularLength x, const LatticeSpec& spec) {
  const double ecc = std::fabs(x.arcsec());
  for (const auto& b : spec.ladder())
    if (le_tol(ecc, spec.n_x * b.radius.arcsec())) return b.index;
  return std::nullopt;
}

}  // namespace pyrafove
