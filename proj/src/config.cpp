#include "pyrafove/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "pyrafove/errors.hpp"
#include "pyrafove/parallel.hpp"

namespace pyrafove {

namespace {

using json = nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

LatticeSpec parse_lattice(const json& j) {
  try {
    return LatticeSpec::from_json(j.dump());
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("lattice: ") + e.what());
  }
}

void parse_bank(const json& j, ObserverConfig& o, const std::string& where) {
  check_keys(j, {"pixels_per_degree", "n_theta", "wavelength_ratio", "sigma_ratio", "contrast_floor"}, where);
  read(j, "pixels_per_degree", o.pixels_per_degree, where);
  read(j, "n_theta", o.n_theta, where);
  read(j, "wavelength_ratio", o.gabor.wavelength_ratio, where);
  read(j, "sigma_ratio", o.gabor.sigma_ratio, where);
  read(j, "contrast_floor", o.contrast_floor, where);
  require(o.pixels_per_degree > 0.0, where + ".pixels_per_degree must be positive");
  require(o.n_theta >= 1, where + ".n_theta must be at least 1");
  require(o.gabor.wavelength_ratio > 0.0 && o.gabor.sigma_ratio > 0.0, where + ": Gabor ratios must be positive");
  require(o.contrast_floor >= 0.0, where + ".contrast_floor must be non-negative");
}

StageSpec parse_stage(const json& j, const std::string& where) {
  check_keys(j, {"index", "pool", "scale_pool", "s_stage", "n_templates", "template_size", "normalization",
                 "sharpness"},
             where);
  StageSpec s;
  read(j, "index", s.index, where);
  std::string pool = to_string(s.pool);
  read(j, "pool", pool, where);
  try {
    s.pool = pool_function_from_string(pool);
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  read(j, "scale_pool", s.scale_pool, where);
  read(j, "s_stage", s.s_stage, where);
  read(j, "n_templates", s.n_templates, where);
  read(j, "template_size", s.template_size, where);
  std::string norm = "cosine";
  read(j, "normalization", norm, where);
  if (norm == "cosine") s.normalization = SNormalization::Cosine;
  else if (norm == "template-only") s.normalization = SNormalization::TemplateOnly;
  else throw ConfigError(where + ": unknown normalization '" + norm + "'");
  read(j, "sharpness", s.sharpness, where);
  require(s.index >= 2, where + ".index must be at least 2");
  require(s.n_templates >= 1, where + ".n_templates must be positive");
  require(s.template_size >= 1 && s.template_size % 2 == 1, where + ".template_size must be odd and positive");
  require(s.sharpness > 0.0, where + ".sharpness must be positive");
  return s;
}

std::vector<StageSpec> parse_stages(const json& j, const std::string& where) {
  require(j.is_array(), where + " must be an array");
  std::vector<StageSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(parse_stage(j[i], where + "[" + std::to_string(i) + "]"));
    require(out.back().index == static_cast<int>(i) + 2, where + ": stage indices must run 2, 3, ...");
  }
  return out;
}

void parse_recognition(const json& j, RecognitionConfig& r, const std::string& where) {
  check_keys(j, {"alphabet", "criterion", "trials", "jitter_fraction", "noise_sigma", "grid_ratio", "refinements"},
             where);
  read(j, "alphabet", r.alphabet, where);
  read(j, "criterion", r.criterion, where);
  read(j, "trials", r.trials, where);
  read(j, "jitter_fraction", r.jitter_fraction, where);
  read(j, "noise_sigma", r.noise_sigma, where);
  read(j, "grid_ratio", r.grid_ratio, where);
  read(j, "refinements", r.refinements, where);
  require(!r.alphabet.empty(), where + ".alphabet is empty");
  for (char c : r.alphabet)
    require(has_glyph(c), where + ".alphabet: no glyph for '" + std::string(1, c) + "'");
  require(r.criterion > 0.0 && r.criterion <= 1.0, where + ".criterion must lie in (0, 1]");
  require(r.trials >= 1, where + ".trials must be positive");
  require(r.jitter_fraction >= 0.0, where + ".jitter_fraction must be non-negative");
  require(r.noise_sigma >= 0.0, where + ".noise_sigma must be non-negative");
  require(r.grid_ratio > 1.0, where + ".grid_ratio must exceed 1");
  require(r.refinements >= 0, where + ".refinements must be non-negative");
}

void parse_observer(const json& j, ObserverConfig& o, const std::string& where) {
  if (j.contains("lattice")) o.spec = parse_lattice(j.at("lattice"));
  if (j.contains("bank")) parse_bank(j.at("bank"), o, where + ".bank");
}

char parse_glyph(const json& j, char def, const std::string& where) {
  std::string g(1, def);
  read(j, "glyph", g, where);
  require(g.size() == 1 && has_glyph(g[0]), where + ".glyph must be one available letter");
  return g[0];
}

AnstisConfig parse_anstis(const json& j) {
  const std::string w = "experiments.anstis";
  check_keys(j, {"lattice", "bank", "recognition", "eccentricities_arcsec", "start_size_factor", "max_size_factor"},
             w);
  AnstisConfig c;
  parse_observer(j, c.observer, w);
  if (j.contains("recognition")) parse_recognition(j.at("recognition"), c.recognition, w + ".recognition");
  read(j, "eccentricities_arcsec", c.eccentricities_arcsec, w);
  read(j, "start_size_factor", c.start_size_factor, w);
  read(j, "max_size_factor", c.max_size_factor, w);
  require(!c.eccentricities_arcsec.empty(), w + ".eccentricities_arcsec is empty");
  require(c.start_size_factor > 0.0 && c.max_size_factor >= c.start_size_factor,
          w + ": need 0 < start_size_factor <= max_size_factor");
  return c;
}

ScaleConfig parse_scale(const json& j) {
  const std::string w = "experiments.scale";
  check_keys(j, {"lattice", "bank", "glyph", "center_band", "letter_size_factor", "exponents", "threshold"}, w);
  ScaleConfig c;
  parse_observer(j, c.observer, w);
  c.glyph = parse_glyph(j, c.glyph, w);
  read(j, "center_band", c.center_band, w);
  read(j, "letter_size_factor", c.letter_size_factor, w);
  read(j, "exponents", c.exponents, w);
  read(j, "threshold", c.threshold, w);
  require(c.letter_size_factor > 0.0, w + ".letter_size_factor must be positive");
  return c;
}

TranslationConfig parse_translation(const json& j) {
  const std::string w = "experiments.translation";
  check_keys(j, {"lattice", "bank", "glyph", "letter_size_factor", "step_factor", "max_steps", "threshold"}, w);
  TranslationConfig c;
  parse_observer(j, c.observer, w);
  c.glyph = parse_glyph(j, c.glyph, w);
  read(j, "letter_size_factor", c.letter_size_factor, w);
  read(j, "step_factor", c.step_factor, w);
  read(j, "max_steps", c.max_steps, w);
  read(j, "threshold", c.threshold, w);
  require(c.letter_size_factor > 0.0, w + ".letter_size_factor must be positive");
  return c;
}

CrowdingConfig parse_crowding(const json& j) {
  const std::string w = "experiments.crowding";
  check_keys(j, {"lattice", "bank", "recognition", "eccentricities_arcsec", "stages", "read_stages",
                 "target_size_factor", "layout", "max_spacing_factor", "random_template_fraction", "metric"},
             w);
  CrowdingConfig c;
  parse_observer(j, c.observer, w);
  if (j.contains("recognition")) parse_recognition(j.at("recognition"), c.recognition, w + ".recognition");
  read(j, "eccentricities_arcsec", c.eccentricities_arcsec, w);
  if (j.contains("stages")) c.stages = parse_stages(j.at("stages"), w + ".stages");
  read(j, "read_stages", c.read_stages, w);
  read(j, "target_size_factor", c.target_size_factor, w);
  std::string layout = to_string(c.layout);
  read(j, "layout", layout, w);
  c.layout = flanker_layout_from_string(layout);
  read(j, "max_spacing_factor", c.max_spacing_factor, w);
  read(j, "random_template_fraction", c.random_template_fraction, w);
  std::string metric = c.metric == Metric::Cosine ? "cosine" : "correlation";
  read(j, "metric", metric, w);
  if (metric == "cosine") c.metric = Metric::Cosine;
  else if (metric == "correlation") c.metric = Metric::Correlation;
  else throw ConfigError(w + ": unknown metric '" + metric + "'");
  require(c.target_size_factor > 0.0, w + ".target_size_factor must be positive");
  require(c.random_template_fraction >= 0.0 && c.random_template_fraction <= 1.0,
          w + ".random_template_fraction must lie in [0, 1]");
  return c;
}

}  // namespace

std::vector<StageSpec> RunConfig::default_stage_chain() {
  std::vector<StageSpec> out;
  for (int k = 2; k <= 5; ++k) {
    StageSpec s;
    s.index = k;
    out.push_back(s);
  }
  return out;
}

ObserverConfig RunConfig::observer() const {
  ObserverConfig o;
  o.spec = lattice;
  o.pixels_per_degree = bank.pixels_per_degree;
  o.n_theta = bank.n_theta;
  o.gabor.wavelength_ratio = bank.wavelength_ratio;
  o.gabor.sigma_ratio = bank.sigma_ratio;
  o.contrast_floor = bank.contrast_floor;
  o.threads = resolve_threads(threads);
  return o;
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"lattice", "bank", "stages", "template_alphabet", "template_letter_factor", "fixation_arcsec",
                 "empirical_m0_inv_arcsec", "empirical_slope_per_degree", "seed", "output_dir", "threads", "experiments"},
             "config");
  RunConfig c;
  if (j.contains("lattice")) c.lattice = parse_lattice(j.at("lattice"));
  if (j.contains("bank")) {
    ObserverConfig o = c.observer();
    parse_bank(j.at("bank"), o, "bank");
    c.bank = {o.pixels_per_degree, o.n_theta, o.gabor.wavelength_ratio, o.gabor.sigma_ratio, o.contrast_floor};
  }
  if (j.contains("stages")) c.stages = parse_stages(j.at("stages"), "stages");
  read(j, "template_alphabet", c.template_alphabet, "config");
  for (char ch : c.template_alphabet)
    require(has_glyph(ch), "template_alphabet: no glyph for '" + std::string(1, ch) + "'");
  require(!c.template_alphabet.empty(), "template_alphabet is empty");
  read(j, "template_letter_factor", c.template_letter_factor, "config");
  require(c.template_letter_factor > 0.0, "template_letter_factor must be positive");
  if (j.contains("fixation_arcsec")) {
    std::vector<double> fix;
    read(j, "fixation_arcsec", fix, "config");
    require(fix.size() == 2, "fixation_arcsec must be [x, y]");
    c.fixation_x_arcsec = fix[0];
    c.fixation_y_arcsec = fix[1];
  }
  if (j.contains("empirical_m0_inv_arcsec")) {
    double v = 0.0;
    read(j, "empirical_m0_inv_arcsec", v, "config");
    require(v > 0.0, "empirical_m0_inv_arcsec must be positive");
    c.empirical_m0_inv_arcsec = v;
  }
  if (j.contains("empirical_slope_per_degree")) {
    double v = 0.0;
    read(j, "empirical_slope_per_degree", v, "config");
    require(v >= 0.0, "empirical_slope_per_degree must be non-negative");
    c.empirical_slope_per_degree = v;
  }
  read(j, "seed", c.seed, "config");
  read(j, "output_dir", c.output_dir, "config");
  if (j.contains("threads")) {
    int t = 0;
    read(j, "threads", t, "config");
    require(t >= 1, "threads must be positive");
    c.threads = t;
  }
  if (j.contains("experiments")) {
    const json& e = j.at("experiments");
    check_keys(e, {"anstis", "scale", "translation", "crowding"}, "experiments");
    if (e.contains("anstis")) c.anstis = parse_anstis(e.at("anstis"));
    if (e.contains("scale")) c.scale = parse_scale(e.at("scale"));
    if (e.contains("translation")) c.translation = parse_translation(e.at("translation"));
    if (e.contains("crowding")) c.crowding = parse_crowding(e.at("crowding"));
  }
  apply_overrides(c, std::nullopt, std::nullopt, std::nullopt);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

int resolve_threads(const std::optional<int>& requested) {
  if (requested) return *requested;
  return default_thread_count();
}

void apply_overrides(RunConfig& cfg, std::optional<std::uint64_t> seed, std::optional<int> threads,
                     std::optional<std::string> out_dir) {
  if (seed) cfg.seed = *seed;
  if (threads) {
    if (*threads < 1) throw ConfigError("--threads must be positive");
    cfg.threads = *threads;
  }
  if (out_dir) cfg.output_dir = *out_dir;
  const int t = resolve_threads(cfg.threads);
  if (cfg.anstis) cfg.anstis->observer.threads = t, cfg.anstis->seed = cfg.seed;
  if (cfg.scale) cfg.scale->observer.threads = t;
  if (cfg.translation) cfg.translation->observer.threads = t;
  if (cfg.crowding) cfg.crowding->observer.threads = t, cfg.crowding->seed = cfg.seed;
}

}  // namespace pyrafove
