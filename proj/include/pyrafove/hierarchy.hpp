#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "pyrafove/fragment.hpp"

namespace pyrafove {

enum class PoolFunction { Max, Mean };

/// How an S stage scores a neighbourhood N against a template T.
enum class SNormalization {
  Cosine,        // <N, T> / (|N| |T|), 0 for an empty neighbourhood
  TemplateOnly,  // <N, T> / |T|
};

std::string to_string(PoolFunction p);
PoolFunction pool_function_from_string(const std::string& s);

/// One S (optional) + C stage. Stage 1 is the fragment itself; specs
/// describe stages 2, 3, ... in order.
struct StageSpec {
  int index = 2;
  PoolFunction pool = PoolFunction::Max;
  bool scale_pool = true;
  bool s_stage = true;
  int n_templates = 32;
  int template_size = 3;
  SNormalization normalization = SNormalization::Cosine;
  /// Cosine responses are raised to this power; 1 leaves them unchanged.
  double sharpness = 1.0;
};

struct StageArray {
  LatticeTensor data;
  int stage = 1;
  bool two_d = false;
  /// Sample spacing of each band in visual angle.
  std::vector<double> spacing_arcsec;
};

/// Small tensor sx x sy x channels, stored ((x * sy) + y) * channels + c.
struct StageTemplate {
  int sx = 0;
  int sy = 0;
  int channels = 0;
  std::vector<double> weights;
};

struct Signature {
  std::vector<double> values;
  int n_s = 0;
  int width = 0;
  int height = 0;
  int channels = 0;
};

StageArray stage_one(const IPFragment& f);

/// 2x2 stride-2 pooling (ceil, last window replicated at odd widths), plus
/// pairwise band pooling when spec.scale_pool and more than one band remains.
/// Returns nullopt when the width is below 2.
std::optional<StageArray> c_pool(const StageArray& arr, const StageSpec& spec);

/// Template matching over "same"-padded neighbourhoods, independently per band.
StageArray s_stage(const StageArray& arr, const std::vector<StageTemplate>& templates,
                   SNormalization normalization = SNormalization::Cosine, double sharpness = 1.0);

struct HierarchyResult {
  std::vector<StageArray> stages;  // stages[0] is stage 1
  Signature signature;
};

/// templates[k] feeds stages[k]; it may be empty when that stage has no S step.
/// Pooling stops early once the width drops below 2.
HierarchyResult run_hierarchy(const IPFragment& f, const std::vector<StageSpec>& stages,
                              const std::vector<std::vector<StageTemplate>>& templates);
HierarchyResult run_hierarchy(const StageArray& input, const std::vector<StageSpec>& stages,
                              const std::vector<std::vector<StageTemplate>>& templates);

Signature flatten(const StageArray& arr);

/// Receptive-field slope at a stage: a * 2^(stage - 1).
double stage_rf_slope(int stage, double a);

/// Widths after each of `pools` ceil-halvings, starting with w.
std::vector<int> width_chain(int w, int pools);

/// Stage-k unit holding stage-1 column `column` (0-based), and the stage-1
/// columns [first, last) covered by stage-k unit `unit`.
int stage_unit(int column, int stage);
std::pair<int, int> stage_span(int unit, int stage);

/// Samples templates for every S stage: neighbourhoods of the corpus arrays at
/// that stage, plus a share of uniform random patches. Deterministic in `seed`.
std::vector<std::vector<StageTemplate>> learn_templates(const std::vector<StageArray>& corpus,
                                                        const std::vector<StageSpec>& stages,
                                                        std::uint64_t seed,
                                                        double random_fraction = 0.25);

}  // namespace pyrafove
