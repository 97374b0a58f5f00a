#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pyrafove/angle.hpp"

namespace pyrafove {

/// One template size. `radius` is the envelope radius s; channel tables
/// in the literature usually quote the diameter 2s.
struct ScaleBand {
  int index = 0;
  AngularLength radius;

  AngularLength diameter() const { return radius * 2.0; }
};

enum class Region {
  TruncatedPyramid,    // constant s_max at every eccentricity
  ConstantDifference,  // same number of bands at every eccentricity
};

enum class Dimensionality { OneD, TwoD };

std::string to_string(Region r);
std::string to_string(Dimensionality d);
Region region_from_string(const std::string& s);
Dimensionality dimensionality_from_string(const std::string& s);

/// Full parameterization of the inverted truncated pyramid.
///
/// `slope_a` is the nominal slope of the lower boundary s_min(x) = a|x|.
/// The realized lattice boundary is |x| = n_x s, i.e. slope 1/n_x; with the
/// default n_x = round(1/a) the two agree whenever 1/a is an integer.
struct LatticeSpec {
  std::vector<ScaleBand> bands;
  double slope_a = 0.05;
  int n_x = 20;
  Region region = Region::TruncatedPyramid;
  std::optional<double> geometric_factor;
  Dimensionality dimensionality = Dimensionality::OneD;
  /// TwoD only: radial support |(x, y)| <= n_x s instead of the per-axis square.
  bool radial = false;
  /// ConstantDifference only: bands appended above s_max for larger eccentricities.
  int extended_bands = 2;

  /// Throws ParameterError when an invariant does not hold.
  void validate() const;

  int n_s() const { return static_cast<int>(bands.size()); }
  int width() const { return 2 * n_x + 1; }
  int dims() const { return dimensionality == Dimensionality::TwoD ? 2 : 1; }
  AngularLength s_min() const { return bands.front().radius; }
  AngularLength s_max() const { return bands.back().radius; }
  double boundary_slope() const { return 1.0 / n_x; }

  /// Bands actually populated by the lattice: `bands` for the pyramid,
  /// `bands` plus `extended_bands` continuation bands for ConstantDifference.
  std::vector<ScaleBand> ladder() const;

  /// Canonical key-value serialization (JSON text, sorted keys).
  std::string to_json() const;
  static LatticeSpec from_json(const std::string& text);
  /// FNV-1a 64 of the canonical serialization, as 16 hex digits.
  std::string hash() const;
};

/// n_x = round(1/a).
int n_x_from_slope(double a);

/// Builds a spec from band radii, deriving n_x from the slope.
LatticeSpec make_lattice_spec(std::vector<ScaleBand> bands, double slope_a,
                              Dimensionality dims = Dimensionality::OneD);

struct SamplePoint {
  int i_s = 0;
  int i_x = 0;
  int i_y = 0;
  AngularLength x;
  AngularLength y;
  AngularLength s;
};

/// Coordinates on the square index lattice.
struct MagicIndex {
  int i_s = 0;
  int i_x = 0;
  friend bool operator==(const MagicIndex&, const MagicIndex&) = default;
};

/// The five channels of the Marr et al. estimate (radii 40", 93", 186", 351", 630").
std::vector<ScaleBand> marr_default_bands();

/// Bands s_min f^k for k = 0..floor(log_f(s_max/s_min)).
std::vector<ScaleBand> geometric_bands(AngularLength s_min, AngularLength s_max, double f);

bool in_region(AngularLength x, AngularLength s, const LatticeSpec& spec);
/// Two-dimensional membership: per-axis square support unless `spec.radial`.
bool in_region(AngularLength x, AngularLength y, AngularLength s, const LatticeSpec& spec);

std::vector<SamplePoint> build_lattice(const LatticeSpec& spec);

/// Number of lattice points per ladder band.
std::vector<int> points_per_band(const std::vector<SamplePoint>& lattice, int n_bands);

/// Maps a lattice-resolvable (x, s) to (band index, samples from center).
/// Throws BandLookupError if s is not a ladder radius, OutOfRegionError if
/// |x/s| exceeds n_x.
MagicIndex magic_map(AngularLength x, AngularLength s, const LatticeSpec& spec);

struct LatticeCoord {
  AngularLength x;
  AngularLength s;
};
LatticeCoord inverse_magic_map(MagicIndex idx, const LatticeSpec& spec);

/// Index transforms on (i_s, i_x). Both are pure translations of the index
/// lattice, hence commute wherever the result stays in bounds.
MagicIndex shift_index(MagicIndex idx, int di_x);
MagicIndex scale_shift_index(MagicIndex idx, int di_s);
bool index_in_bounds(MagicIndex idx, const LatticeSpec& spec);

/// R = s_min_diameter / a. With a = 0.1 and a 1'20" smallest diameter this
/// gives 800" (about 13').
AngularLength infer_foveola_radius(double a, AngularLength s_min_diameter);

/// Half-range of translation invariance at band radius s: n_x * s.
AngularLength invariance_range(AngularLength s, const LatticeSpec& spec);

/// Empirical inverse magnification M0_inv (1 + a_emp x), x in degrees.
double empirical_inverse_magnification(AngularLength x, double m0_inv, double a_emp);

/// Lower boundary of the model region: max(s_min, |x| / n_x).
AngularLength model_lower_boundary(AngularLength x, const LatticeSpec& spec);

/// Band index whose radius matches s within 1e-9 relative, if any.
std::optional<int> find_band(AngularLength s, const std::vector<ScaleBand>& bands);

/// Finest band whose spatial extent n_x s contains eccentricity |x|.
std::optional<int> finest_covering_band(AngularLength x, const LatticeSpec& spec);

}  // namespace pyrafove
