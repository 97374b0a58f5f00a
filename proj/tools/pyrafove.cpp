#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "pyrafove/config.hpp"
#include "pyrafove/errors.hpp"
#include "pyrafove/experiments.hpp"
#include "pyrafove/fragment.hpp"
#include "pyrafove/hierarchy.hpp"
#include "pyrafove/image.hpp"
#include "pyrafove/report.hpp"

using namespace pyrafove;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kNumeric = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run configuration")->required();
  cmd->add_option("--seed", c.seed, "Override the config seed");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--threads", c.threads, "Worker threads (default: PYRAFOVE_THREADS or all cores)");
}

RunConfig load(const Common& c) {
  RunConfig cfg = load_run_config(c.config);
  apply_overrides(cfg, c.seed, c.threads, c.out);
  return cfg;
}

std::filesystem::path out_dir(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.output_dir + ": " + ec.message());
  return cfg.output_dir;
}

std::string num(double v) { return format_number(v); }

int cmd_lattice(const RunConfig& cfg) {
  const LatticeSpec& spec = cfg.lattice;
  const auto dir = out_dir(cfg);
  const auto points = build_lattice(spec);
  Table lattice({"i_s", "i_x", "i_y", "x_arcsec", "y_arcsec", "s_arcsec"});
  for (const auto& p : points)
    lattice.add_row({std::to_string(p.i_s), std::to_string(p.i_x), std::to_string(p.i_y), num(p.x.arcsec()),
                     num(p.y.arcsec()), num(p.s.arcsec())});
  write_text((dir / "lattice.csv").string(), lattice.csv());

  const double s_min = spec.s_min().arcsec();
  const double m0 = cfg.empirical_m0_inv_arcsec.value_or(s_min);
  const double slope = cfg.empirical_slope_per_degree.value_or(3600.0 * spec.boundary_slope() / s_min);
  const double extent = spec.n_x * spec.s_max().arcsec();
  Table boundary({"eccentricity_arcsec", "model_arcsec", "empirical_arcsec"});
  Series model{"model lower boundary", {}, {}, true, false};
  Series emp{"empirical fit", {}, {}, true, false};
  const int n = 200;
  for (int i = 0; i <= n; ++i) {
    const double x = extent * i / n;
    const double m = model_lower_boundary(AngularLength::from_arcsec(x), spec).arcsec();
    const double e = empirical_inverse_magnification(AngularLength::from_arcsec(x), m0, slope);
    boundary.add_row({num(x), num(m), num(e)});
    model.x.push_back(x / 3600.0);
    model.y.push_back(m);
    emp.x.push_back(x / 3600.0);
    emp.y.push_back(e);
  }
  write_text((dir / "boundary.csv").string(), boundary.csv());
  Plot p;
  p.title = "Smallest sampled radius vs eccentricity";
  p.x_label = "eccentricity (deg)";
  p.y_label = "radius (arcsec)";
  p.series = {model, emp};
  write_text((dir / "boundary.svg").string(), render_svg(p));
  std::cout << "lattice: " << points.size() << " points, " << spec.n_s() << " bands -> " << dir.string() << "\n";
  return kOk;
}

RetinalImage load_retinal(const std::string& path, const RunConfig& cfg) {
  RetinalImage img;
  img.pixels = read_image(path);
  img.pixels_per_degree = cfg.bank.pixels_per_degree;
  img.fixation_x = AngularLength::from_arcsec(cfg.fixation_x_arcsec);
  img.fixation_y = AngularLength::from_arcsec(cfg.fixation_y_arcsec);
  img.validate();
  return img;
}

int cmd_fragment(const RunConfig& cfg, const std::string& image, bool csv) {
  const ObserverConfig obs = cfg.observer();
  const TemplateBank bank = obs.make_bank();
  const RetinalImage img = load_retinal(image, cfg);
  ExtractOptions opts;
  opts.threads = obs.threads;
  const IPFragment f = extract(img, cfg.lattice, bank, opts);
  const auto dir = out_dir(cfg);
  write_fragment(f, (dir / "fragment.pfrag").string());
  if (csv) write_text((dir / "fragment.csv").string(), fragment_csv(f));
  std::cout << "fragment: " << f.data.n_s << "x" << f.data.width << "x" << f.data.height << "x" << f.data.channels
            << " -> " << (dir / "fragment.pfrag").string() << "\n";
  return kOk;
}

IPFragment as_fragment(const StageArray& a, const IPFragment& source) {
  IPFragment f = source;
  f.data = a.data;
  f.n_x = a.data.width / 2;
  f.band_radii_arcsec.resize(a.data.n_s);
  for (int s = 0; s < a.data.n_s; ++s)
    f.band_radii_arcsec[s] = s < static_cast<int>(source.band_radii_arcsec.size()) ? source.band_radii_arcsec[s] : 0.0;
  return f;
}

int cmd_hierarchy(const RunConfig& cfg, const std::string& image) {
  const ObserverConfig obs = cfg.observer();
  const TemplateBank bank = obs.make_bank();
  ExtractOptions opts;
  opts.threads = obs.threads;

  std::vector<StageArray> corpus;
  const double size = cfg.template_letter_factor * cfg.lattice.s_min().arcsec();
  for (char c : cfg.template_alphabet)
    corpus.push_back(stage_one(extract(render_scene({{c, 0.0, 0.0, size}}, obs.pixels_per_degree), cfg.lattice,
                                       bank, opts)));
  const auto templates = learn_templates(corpus, cfg.stages, cfg.seed);

  const IPFragment f = extract(load_retinal(image, cfg), cfg.lattice, bank, opts);
  const HierarchyResult h = run_hierarchy(f, cfg.stages, templates);
  const auto dir = out_dir(cfg);
  nlohmann::json summary;
  summary["stages"] = nlohmann::json::array();
  for (const auto& st : h.stages) {
    const std::string name = "stage_" + std::to_string(st.stage) + ".pfrag";
    write_fragment(as_fragment(st, f), (dir / name).string(), StageAnnotation{st.stage, st.spacing_arcsec});
    summary["stages"].push_back({{"stage", st.stage},
                                 {"file", name},
                                 {"shape", {st.data.n_s, st.data.width, st.data.height, st.data.channels}},
                                 {"spacing_arcsec", st.spacing_arcsec}});
  }
  Table sig({"index", "value"});
  for (std::size_t i = 0; i < h.signature.values.size(); ++i) sig.add_row({std::to_string(i), num(h.signature.values[i])});
  write_text((dir / "signature.csv").string(), sig.csv());
  summary["signature_shape"] = {h.signature.n_s, h.signature.width, h.signature.height, h.signature.channels};
  summary["seed"] = cfg.seed;
  write_text((dir / "hierarchy.json").string(), summary.dump(2) + "\n");
  std::cout << "hierarchy: " << h.stages.size() << " stages -> " << dir.string() << "\n";
  return kOk;
}

int cmd_experiment(const RunConfig& cfg, const std::string& name) {
  ExperimentResult r;
  auto missing = [&] {
    std::cerr << "error: config has no experiments." << name << " block\n";
    return kUsage;
  };
  if (name == "anstis") {
    if (!cfg.anstis) return missing();
    r = anstis_experiment(*cfg.anstis);
  } else if (name == "scale") {
    if (!cfg.scale) return missing();
    r = scale_invariance_curve(*cfg.scale);
  } else if (name == "translation") {
    if (!cfg.translation) return missing();
    r = translation_invariance_curve(*cfg.translation);
  } else if (name == "crowding") {
    if (!cfg.crowding) return missing();
    r = crowding_experiment(*cfg.crowding);
  } else {
    std::cerr << "error: unknown experiment '" << name << "' (anstis, scale, translation, crowding)\n";
    return kUsage;
  }
  const auto dir = out_dir(cfg);
  write_result(r, dir.string());
  std::cout << name << ": results -> " << dir.string() << "\n";
  if (r.censored_only) {
    std::cerr << "warning: every sweep point was censored\n";
    return kNumeric;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eccentricity-dependent sampling lattices, IP fragments and invariance experiments"};
  app.require_subcommand(1);

  Common lattice_opts, fragment_opts, hierarchy_opts, experiment_opts;
  std::string fragment_image, hierarchy_image, experiment_name;
  bool fragment_csv = false;
  std::optional<double> fix_x, fix_y;

  auto* lattice = app.add_subcommand("lattice", "Write the sample lattice and region boundary");
  add_common(lattice, lattice_opts);

  auto* fragment = app.add_subcommand("fragment", "Extract an IP fragment from a PGM or PNG image");
  fragment->add_option("image", fragment_image, "Input image")->required();
  fragment->add_option("--fixation-x", fix_x, "Fixation x in arcsec from the image center");
  fragment->add_option("--fixation-y", fix_y, "Fixation y in arcsec from the image center");
  fragment->add_flag("--csv", fragment_csv, "Also write the fragment as CSV");
  add_common(fragment, fragment_opts);

  auto* hierarchy = app.add_subcommand("hierarchy", "Run the S/C stage chain on an image");
  hierarchy->add_option("image", hierarchy_image, "Input image")->required();
  add_common(hierarchy, hierarchy_opts);

  auto* experiment = app.add_subcommand("experiment", "Run one experiment block");
  experiment->add_option("name", experiment_name, "anstis | scale | translation | crowding")->required();
  add_common(experiment, experiment_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (lattice->parsed()) return cmd_lattice(load(lattice_opts));
    if (fragment->parsed()) {
      RunConfig cfg = load(fragment_opts);
      if (fix_x) cfg.fixation_x_arcsec = *fix_x;
      if (fix_y) cfg.fixation_y_arcsec = *fix_y;
      return cmd_fragment(cfg, fragment_image, fragment_csv);
    }
    if (hierarchy->parsed()) return cmd_hierarchy(load(hierarchy_opts), hierarchy_image);
    if (experiment->parsed()) return cmd_experiment(load(experiment_opts), experiment_name);
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  }
  return kUsage;
}
