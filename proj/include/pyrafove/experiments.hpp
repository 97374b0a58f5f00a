#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pyrafove/fragment.hpp"
#include "pyrafove/hierarchy.hpp"
#include "pyrafove/report.hpp"
#include "pyrafove/stimulus.hpp"
#include "pyrafove/templates.hpp"

namespace pyrafove {

// ---- statistics ---------------------------------------------------------

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int n = 0;
};

/// Ordinary least squares y = slope x + intercept.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);
/// Least squares through the origin. r2 uses the centered total sum of
/// squares, so a good score also requires the origin constraint to fit.
LinearFit fit_through_origin(const std::vector<double>& x, const std::vector<double>& y);
/// Sample standard deviation over mean.
double coefficient_of_variation(const std::vector<double>& v);
/// Pearson correlation; 0 when either side is constant.
double pearson(const std::vector<double>& a, const std::vector<double>& b);
double cosine(const std::vector<double>& a, const std::vector<double>& b);

enum class Metric { Cosine, Correlation };

/// Index of the most similar gallery entry; ties go to the lowest index.
int nn_classify(const std::vector<double>& probe, const std::vector<std::vector<double>>& gallery,
                Metric metric = Metric::Cosine);
/// Fragment form, scored with fragment_similarity.
int nn_classify(const IPFragment& probe, const std::vector<IPFragment>& gallery,
                const std::vector<double>& band_weights);

// ---- threshold search ----------------------------------------------------

struct SearchStep {
  double value = 0.0;
  double accuracy = 0.0;
};

struct SearchResult {
  double threshold = 0.0;
  bool censored = false;
  bool at_floor = false;  // the criterion held all the way down to the minimum
  std::vector<SearchStep> steps;
};

/// Steps from `start` by factors of `ratio` (up while accuracy is below the
/// criterion, down while it is met) within [min_value, max_value] until the
/// outcome flips, then bisects that bracket geometrically `refinements`
/// times. The threshold is the geometric mean of the final bracket.
SearchResult threshold_search(double start, double min_value, double max_value, double ratio,
                              int refinements, double criterion,
                              const std::function<double(double)>& accuracy);

// ---- scenes --------------------------------------------------------------

struct Placement {
  char glyph = 'E';
  double x_arcsec = 0.0;  // relative to fixation, x right
  double y_arcsec = 0.0;  // y down
  double size_arcsec = 0.0;
};

/// Letters (ink 1 on 0) on the smallest canvas holding the fixation and every
/// letter. The fixation falls on a whole pixel. When `rng` is given, pixel
/// noise is added inside each letter's box.
RetinalImage render_scene(const std::vector<Placement>& letters, double pixels_per_degree,
                          double noise_sigma = 0.0, Rng* rng = nullptr);

/// Pastes a patch centered at (x, y) arcsec from the fixation, on a canvas
/// of the patch's background value that also holds the fixation.
RetinalImage render_patch_scene(const Stimulus& stim, double x_arcsec, double y_arcsec);

// ---- shared configuration ------------------------------------------------

struct ObserverConfig {
  LatticeSpec spec;
  double pixels_per_degree = 360.0;
  int n_theta = 4;
  GaborParams gabor;
  double contrast_floor = 0.02;
  int threads = 1;

  TemplateBank make_bank() const;
  nlohmann::json to_json() const;
};

struct RecognitionConfig {
  std::string alphabet = "CDHKNORZ";
  double criterion = 0.75;
  int trials = 20;
  double jitter_fraction = 0.25;  // of the local sample spacing
  double noise_sigma = 0.01;
  double grid_ratio = 1.5;
  int refinements = 3;

  nlohmann::json to_json() const;
};

struct ExperimentResult {
  std::string name;
  Table trials;
  Table conditions;
  nlohmann::json summary;
  std::vector<std::pair<std::string, Plot>> plots;  // file stem, plot
  /// True when every sweep point was censored.
  bool censored_only = false;
};

/// Writes <name>_trials.csv, <name>_conditions.csv, <name>_summary.json and
/// one SVG per plot into `dir`.
void write_result(const ExperimentResult& r, const std::string& dir);

// ---- experiments ---------------------------------------------------------

/// Geometric bands 40..640 arcsec with f = 2, n_x = 20, 2D.
LatticeSpec experiment_lattice();

struct AnstisConfig {
  ObserverConfig observer = [] {
    ObserverConfig o;
    o.spec = experiment_lattice();
    o.pixels_per_degree = 720.0;
    return o;
  }();
  RecognitionConfig recognition;
  std::vector<double> eccentricities_arcsec = {0, 200, 400, 600, 800, 1200, 2400, 4800, 9600};
  double start_size_factor = 1.0;  // first size tried, in local sample spacings
  double max_size_factor = 16.0;
  std::uint64_t seed = 1;
};

ExperimentResult anstis_experiment(const AnstisConfig& cfg);

struct ScaleConfig {
  ObserverConfig observer = [] {
    ObserverConfig o;
    o.spec = experiment_lattice();
    return o;
  }();
  char glyph = 'E';
  int center_band = 2;
  double letter_size_factor = 5.0;  // letter height in band radii
  std::vector<int> exponents = {-3, -2, -1, 0, 1, 2, 3};
  double threshold = 0.8;
};

/// Stimulus band-passed at the center band vs copies scaled by f^k. Each
/// scaled copy scores the best correlation of any of its band slices with
/// the reference's center-band slice.
ExperimentResult scale_invariance_curve(const ScaleConfig& cfg);

struct TranslationConfig {
  ObserverConfig observer = [] {
    ObserverConfig o;
    o.spec = make_lattice_spec(marr_default_bands(), 0.05, Dimensionality::TwoD);
    return o;
  }();
  char glyph = 'E';
  double letter_size_factor = 5.0;
  double step_factor = 1.0;  // shift step in band radii
  int max_steps = 30;
  double threshold = 0.8;
};

/// Per band: similarity of the position-pooled band signature vs shift, the
/// measured half-range, and a fit of half-range against band radius.
ExperimentResult translation_invariance_curve(const TranslationConfig& cfg);

enum class FlankerLayout { Tangential, Radial, RadialInner };
std::string to_string(FlankerLayout f);
FlankerLayout flanker_layout_from_string(const std::string& s);

/// Default S+C chain for stages 2..5 with scale pooling off.
std::vector<StageSpec> crowding_stage_chain();

struct CrowdingConfig {
  ObserverConfig observer = [] {
    ObserverConfig o;
    o.spec = experiment_lattice();
    return o;
  }();
  RecognitionConfig recognition;
  std::vector<double> eccentricities_arcsec = {1200, 2400, 4800, 9600};
  std::vector<StageSpec> stages = crowding_stage_chain();
  std::vector<int> read_stages = {2, 3};
  double target_size_factor = 4.5;  // letter height in read-band radii
  FlankerLayout layout = FlankerLayout::Tangential;
  double max_spacing_factor = 19.0;  // in read-band radii
  double random_template_fraction = 0.25;
  Metric metric = Metric::Correlation;
  std::uint64_t seed = 1;
};

ExperimentResult crowding_experiment(const CrowdingConfig& cfg);

/// One band's (x, y, theta) values.
std::vector<double> band_values(const IPFragment& f, int band);
/// Max over columns at every (y, theta) within one band.
std::vector<double> position_pooled_band(const IPFragment& f, int band);

}  // namespace pyrafove
