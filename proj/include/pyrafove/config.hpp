#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pyrafove/experiments.hpp"
#include "pyrafove/geometry.hpp"
#include "pyrafove/hierarchy.hpp"

namespace pyrafove {

struct BankConfig {
  double pixels_per_degree = 360.0;
  int n_theta = 4;
  double wavelength_ratio = 1.0;
  double sigma_ratio = 0.5;
  double contrast_floor = 0.02;
};

/// Everything a CLI run needs. Parsing validates every block and rejects
/// unknown keys, so a RunConfig in hand is ready to compute with.
struct RunConfig {
  LatticeSpec lattice = make_lattice_spec(marr_default_bands(), 0.05);
  BankConfig bank;
  /// Hierarchy chain for the `hierarchy` command.
  std::vector<StageSpec> stages = default_stage_chain();
  std::string template_alphabet = "CDHKNORZ";
  double template_letter_factor = 4.0;  // corpus letter height in s_min units
  /// Empirical M^-1 curve for the boundary comparison, in arcsec at x = 0
  /// and per degree. Unset values follow the model: s_min and a / s_min.
  std::optional<double> empirical_m0_inv_arcsec;
  std::optional<double> empirical_slope_per_degree;
  double fixation_x_arcsec = 0.0;
  double fixation_y_arcsec = 0.0;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::optional<int> threads;

  std::optional<AnstisConfig> anstis;
  std::optional<ScaleConfig> scale;
  std::optional<TranslationConfig> translation;
  std::optional<CrowdingConfig> crowding;

  /// Stages 2..5, max pooling with scale pooling on.
  static std::vector<StageSpec> default_stage_chain();
  ObserverConfig observer() const;
};

/// Throws ConfigError on malformed JSON, unknown keys or invalid values.
RunConfig parse_run_config(const std::string& text);
/// As parse_run_config; an unreadable file is an IoError.
RunConfig load_run_config(const std::string& path);

/// Thread count: explicit value, else PYRAFOVE_THREADS, else the hardware.
int resolve_threads(const std::optional<int>& requested);

/// Pushes seed and thread count into every experiment block.
void apply_overrides(RunConfig& cfg, std::optional<std::uint64_t> seed, std::optional<int> threads,
                     std::optional<std::string> out_dir);

}  // namespace pyrafove
