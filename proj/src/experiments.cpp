#include "pyrafove/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "pyrafove/errors.hpp"
#include "pyrafove/parallel.hpp"

namespace pyrafove {

// ---- statistics ---------------------------------------------------------

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeError("fit: x and y differ in length");
  LinearFit f;
  f.n = static_cast<int>(x.size());
  if (f.n < 2) throw NumericError("fit needs at least two points");
  double mx = 0, my = 0;
  for (int i = 0; i < f.n; ++i) mx += x[i], my += y[i];
  mx /= f.n;
  my /= f.n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < f.n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) throw NumericError("fit: x values are all equal");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (int i = 0; i < f.n; ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    ss_res += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

LinearFit fit_through_origin(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeError("fit: x and y differ in length");
  LinearFit f;
  f.n = static_cast<int>(x.size());
  if (f.n < 2) throw NumericError("fit needs at least two points");
  double sxx = 0, sxy = 0, my = 0;
  for (int i = 0; i < f.n; ++i) {
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    my += y[i];
  }
  if (sxx <= 0.0) throw NumericError("fit: x values are all zero");
  my /= f.n;
  f.slope = sxy / sxx;
  double ss_res = 0, ss_tot = 0;
  for (int i = 0; i < f.n; ++i) {
    const double r = y[i] - f.slope * x[i];
    ss_res += r * r;
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

double coefficient_of_variation(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return m != 0.0 ? sd / m : 0.0;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("correlation: lengths differ");
  const double n = static_cast<double>(a.size());
  if (a.empty()) return 0.0;
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("cosine: lengths differ");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa <= 0.0 || bb <= 0.0) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

int nn_classify(const std::vector<double>& probe, const std::vector<std::vector<double>>& gallery,
                Metric metric) {
  if (gallery.empty()) throw ParameterError("gallery is empty");
  int best = 0;
  double best_sim = -HUGE_VAL;
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    if (gallery[i].size() != probe.size()) throw ShapeError("gallery entry shape differs from probe");
    const double s = metric == Metric::Cosine ? cosine(probe, gallery[i]) : pearson(probe, gallery[i]);
    if (s > best_sim) {
      best_sim = s;
      best = static_cast<int>(i);
    }
  }
  return best;
}

int nn_classify(const IPFragment& probe, const std::vector<IPFragment>& gallery,
                const std::vector<double>& band_weights) {
  if (gallery.empty()) throw ParameterError("gallery is empty");
  int best = 0;
  double best_sim = -HUGE_VAL;
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    const double s = fragment_similarity(probe, gallery[i], band_weights);
    if (s > best_sim) {
      best_sim = s;
      best = static_cast<int>(i);
    }
  }
  return best;
}

// ---- threshold search ----------------------------------------------------

SearchResult threshold_search(double start, double min_value, double max_value, double ratio,
                              int refinements, double criterion,
                              const std::function<double(double)>& accuracy) {
  if (!(min_value > 0.0) || !(ratio > 1.0) || !(min_value <= start && start <= max_value))
    throw ParameterError("threshold search needs 0 < min <= start <= max and ratio > 1");
  SearchResult r;
  auto eval = [&](double v) {
    const double a = accuracy(v);
    r.steps.push_back({v, a});
    return a >= criterion;
  };
  double lo = 0.0, hi = 0.0;
  if (eval(start)) {
    hi = start;
    for (;;) {
      if (hi <= min_value) {
        r.at_floor = true;
        r.threshold = hi;
        return r;
      }
      const double v = std::max(hi / ratio, min_value);
      if (!eval(v)) {
        lo = v;
        break;
      }
      hi = v;
    }
  } else {
    lo = start;
    for (;;) {
      if (lo >= max_value) {
        r.censored = true;
        r.threshold = max_value;
        return r;
      }
      const double v = std::min(lo * ratio, max_value);
      if (eval(v)) {
        hi = v;
        break;
      }
      lo = v;
    }
  }
  for (int i = 0; i < refinements; ++i) {
    const double mid = std::sqrt(lo * hi);
    if (eval(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  r.threshold = std::sqrt(lo * hi);
  return r;
}

// ---- scenes --------------------------------------------------------------

RetinalImage render_scene(const std::vector<Placement>& letters, double pixels_per_degree,
                          double noise_sigma, Rng* rng) {
  const double k = pixels_per_degree / 3600.0;
  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  for (const auto& p : letters) {
    const double h = 0.5 * p.size_arcsec * k + 2.0;
    min_x = std::min(min_x, p.x_arcsec * k - h);
    max_x = std::max(max_x, p.x_arcsec * k + h);
    min_y = std::min(min_y, p.y_arcsec * k - h);
    max_y = std::max(max_y, p.y_arcsec * k + h);
  }
  const int fx = static_cast<int>(std::ceil(-min_x));
  const int fy = static_cast<int>(std::ceil(-min_y));
  const int w = fx + static_cast<int>(std::ceil(max_x)) + 1;
  const int h = fy + static_cast<int>(std::ceil(max_y)) + 1;
  RetinalImage img;
  img.pixels = Image(w, h, 0.0);
  img.pixels_per_degree = pixels_per_degree;
  for (const auto& p : letters)
    draw_letter(img.pixels, p.glyph, p.size_arcsec * k, fx + p.x_arcsec * k, fy + p.y_arcsec * k);
  if (rng && noise_sigma > 0.0) {
    for (const auto& p : letters) {
      const double cx = fx + p.x_arcsec * k;
      const double cy = fy + p.y_arcsec * k;
      const double r = 0.5 * p.size_arcsec * k + 1.0;
      add_noise(img.pixels, static_cast<int>(std::floor(cx - r)), static_cast<int>(std::floor(cy - r)),
                static_cast<int>(std::ceil(cx + r)), static_cast<int>(std::ceil(cy + r)), noise_sigma,
                *rng);
    }
  }
  img.fixation_x = AngularLength::from_arcsec((fx - img.center_px_x()) / k);
  img.fixation_y = AngularLength::from_arcsec((fy - img.center_px_y()) / k);
  return img;
}

RetinalImage render_patch_scene(const Stimulus& stim, double x_arcsec, double y_arcsec) {
  const double k = stim.pixels_per_degree / 3600.0;
  const int dx = static_cast<int>(std::lround(x_arcsec * k));
  const int dy = static_cast<int>(std::lround(y_arcsec * k));
  const int hw = (stim.pixels.width - 1) / 2;
  const int hh = (stim.pixels.height - 1) / 2;
  const int min_x = std::min(0, dx - hw), max_x = std::max(0, dx + hw);
  const int min_y = std::min(0, dy - hh), max_y = std::max(0, dy + hh);
  const int fx = -min_x, fy = -min_y;
  RetinalImage img;
  img.pixels = Image(max_x - min_x + 1, max_y - min_y + 1, stim.background);
  img.pixels_per_degree = stim.pixels_per_degree;
  paste(img.pixels, stim.pixels, fx + dx, fy + dy);
  img.fixation_x = AngularLength::from_arcsec((fx - img.center_px_x()) / k);
  img.fixation_y = AngularLength::from_arcsec((fy - img.center_px_y()) / k);
  return img;
}

// ---- configuration helpers -------------------------------------------------

LatticeSpec experiment_lattice() {
  return make_lattice_spec(geometric_bands(AngularLength::from_arcsec(40), AngularLength::from_arcsec(640), 2.0),
                           0.05, Dimensionality::TwoD);
}

TemplateBank ObserverConfig::make_bank() const {
  return pyrafove::make_bank(spec, n_theta, gabor, pixels_per_degree, contrast_floor);
}

nlohmann::json ObserverConfig::to_json() const {
  nlohmann::json j;
  j["lattice"] = nlohmann::json::parse(spec.to_json());
  j["pixels_per_degree"] = pixels_per_degree;
  j["n_theta"] = n_theta;
  j["wavelength_ratio"] = gabor.wavelength_ratio;
  j["sigma_ratio"] = gabor.sigma_ratio;
  j["contrast_floor"] = contrast_floor;
  return j;
}

nlohmann::json RecognitionConfig::to_json() const {
  return {{"alphabet", alphabet},       {"criterion", criterion},   {"trials", trials},
          {"jitter_fraction", jitter_fraction}, {"noise_sigma", noise_sigma},
          {"grid_ratio", grid_ratio},   {"refinements", refinements}};
}

void write_result(const ExperimentResult& r, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  const std::filesystem::path base(dir);
  write_text((base / (r.name + "_trials.csv")).string(), r.trials.csv());
  write_text((base / (r.name + "_conditions.csv")).string(), r.conditions.csv());
  write_text((base / (r.name + "_summary.json")).string(), r.summary.dump(2) + "\n");
  for (const auto& [stem, plot] : r.plots)
    write_text((base / (stem + ".svg")).string(), render_svg(plot));
}

namespace {

std::string num(double v) { return format_number(v); }

nlohmann::json fit_json(const LinearFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}, {"n", f.n}};
}

void check_alphabet(const std::string& alphabet) {
  if (alphabet.empty()) throw ConfigError("alphabet is empty");
  for (char c : alphabet)
    if (!has_glyph(c)) throw ConfigError(std::string("alphabet letter '") + c + "' has no glyph");
}

double band_factor(const LatticeSpec& spec) {
  if (spec.geometric_factor) return *spec.geometric_factor;
  if (spec.n_s() < 2) throw ConfigError("scale sweep needs at least two bands");
  const double f = spec.bands[1].radius / spec.bands[0].radius;
  for (int i = 2; i < spec.n_s(); ++i)
    if (std::fabs(spec.bands[i].radius / spec.bands[i - 1].radius / f - 1.0) > 1e-9)
      throw ConfigError("scale sweep needs geometric bands");
  return f;
}

int covering_band(double x_arcsec, const LatticeSpec& spec) {
  const auto b = finest_covering_band(AngularLength::from_arcsec(x_arcsec), spec);
  if (!b) throw ConfigError("eccentricity " + num(x_arcsec) + "\" lies beyond the lattice extent");
  return *b;
}

StageArray band_slice(const IPFragment& f, int band) {
  StageArray a;
  const LatticeTensor& t = f.data;
  a.data = LatticeTensor(1, t.width, t.height, t.channels);
  const std::size_t per = static_cast<std::size_t>(t.width) * t.height * t.channels;
  std::copy_n(t.values.begin() + band * per, per, a.data.values.begin());
  std::copy_n(t.flags.begin() + band * per, per, a.data.flags.begin());
  a.stage = 1;
  a.two_d = f.two_d;
  a.spacing_arcsec = {f.band_radii_arcsec[band]};
  return a;
}

}  // namespace

std::vector<double> band_values(const IPFragment& f, int band) {
  const LatticeTensor& t = f.data;
  if (band < 0 || band >= t.n_s) throw BandLookupError("band " + std::to_string(band) + " not in fragment");
  const std::size_t per = static_cast<std::size_t>(t.width) * t.height * t.channels;
  return std::vector<double>(t.values.begin() + band * per, t.values.begin() + (band + 1) * per);
}

std::vector<double> position_pooled_band(const IPFragment& f, int band) {
  const LatticeTensor& t = f.data;
  std::vector<double> out(static_cast<std::size_t>(t.height) * t.channels, 0.0);
  for (int x = 0; x < t.width; ++x)
    for (int y = 0; y < t.height; ++y)
      for (int c = 0; c < t.channels; ++c) {
        double& o = out[static_cast<std::size_t>(y) * t.channels + c];
        o = std::max(o, t.at(band, x, y, c));
      }
  return out;
}

// ---- Anstis ----------------------------------------------------------------

ExperimentResult anstis_experiment(const AnstisConfig& cfg) {
  const RecognitionConfig& rc = cfg.recognition;
  check_alphabet(rc.alphabet);
  if (rc.trials < 1) throw ConfigError("trials must be positive");
  if (cfg.eccentricities_arcsec.empty()) throw ConfigError("no eccentricities given");
  const LatticeSpec& spec = cfg.observer.spec;
  spec.validate();
  const TemplateBank bank = cfg.observer.make_bank();
  const auto ladder = spec.ladder();
  const double ppd = cfg.observer.pixels_per_degree;
  const double floor_arcsec = kMinLetterPixels * 3600.0 / ppd;
  const double plateau = spec.n_x * spec.s_min().arcsec();
  const auto weights = default_band_weights(static_cast<int>(ladder.size()));
  const int n_letters = static_cast<int>(rc.alphabet.size());
  ExtractOptions opts;
  opts.threads = 1;

  ExperimentResult r;
  r.name = "anstis";
  r.trials = Table({"eccentricity_arcsec", "size_arcsec", "letter", "trial", "jitter_x_arcsec",
                    "jitter_y_arcsec", "predicted", "correct"});
  r.conditions = Table({"eccentricity_arcsec", "local_band", "local_radius_arcsec", "threshold_arcsec",
                        "censored", "at_floor", "regime"});

  std::vector<double> thresholds(cfg.eccentricities_arcsec.size());
  std::vector<bool> censored(cfg.eccentricities_arcsec.size());
  for (std::size_t e = 0; e < cfg.eccentricities_arcsec.size(); ++e) {
    const double x = cfg.eccentricities_arcsec[e];
    const int band = covering_band(x, spec);
    const double s_local = ladder[band].radius.arcsec();
    auto accuracy = [&](double size) {
      std::vector<IPFragment> gallery;
      for (char c : rc.alphabet) {
        const auto scene = render_scene({{c, x, 0.0, size}}, ppd);
        gallery.push_back(extract(scene, spec, bank, opts));
      }
      const int n = n_letters * rc.trials;
      std::vector<int> predicted(n);
      std::vector<double> jx(n), jy(n);
      parallel_for(n, cfg.observer.threads, [&](int i) {
        const int li = i / rc.trials;
        const int t = i % rc.trials;
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(li), static_cast<std::uint64_t>(t)));
        jx[i] = rng.uniform(-1.0, 1.0) * rc.jitter_fraction * s_local;
        jy[i] = rng.uniform(-1.0, 1.0) * rc.jitter_fraction * s_local;
        const auto scene =
            render_scene({{rc.alphabet[li], x + jx[i], jy[i], size}}, ppd, rc.noise_sigma, &rng);
        predicted[i] = nn_classify(extract(scene, spec, bank, opts), gallery, weights);
      });
      int correct = 0;
      for (int i = 0; i < n; ++i) {
        const int li = i / rc.trials;
        const bool ok = predicted[i] == li;
        correct += ok;
        r.trials.add_row({num(x), num(size), std::string(1, rc.alphabet[li]), std::to_string(i % rc.trials),
                          num(jx[i]), num(jy[i]), std::string(1, rc.alphabet[predicted[i]]),
                          ok ? "1" : "0"});
      }
      return static_cast<double>(correct) / n;
    };
    const double start = std::max(cfg.start_size_factor * s_local, floor_arcsec);
    const double max_size = std::max(cfg.max_size_factor * s_local, start);
    const SearchResult sr = threshold_search(start, floor_arcsec, max_size, rc.grid_ratio, rc.refinements,
                                             rc.criterion, accuracy);
    thresholds[e] = sr.threshold;
    censored[e] = sr.censored;
    r.conditions.add_row({num(x), std::to_string(band), num(s_local), num(sr.threshold),
                          sr.censored ? "1" : "0", sr.at_floor ? "1" : "0",
                          std::fabs(x) <= plateau ? "plateau" : "linear"});
  }

  std::vector<double> lin_x, lin_y, plat;
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t e = 0; e < thresholds.size(); ++e) {
    const double x = cfg.eccentricities_arcsec[e];
    points.push_back({{"eccentricity_arcsec", x}, {"threshold_arcsec", thresholds[e]},
                      {"censored", static_cast<bool>(censored[e])}});
    if (censored[e]) continue;
    if (std::fabs(x) <= plateau) {
      plat.push_back(thresholds[e]);
    } else {
      lin_x.push_back(std::fabs(x));
      lin_y.push_back(thresholds[e]);
    }
  }
  bool monotone = true;
  {
    std::vector<std::pair<double, double>> sorted;
    for (std::size_t e = 0; e < thresholds.size(); ++e)
      if (!censored[e]) sorted.push_back({std::fabs(cfg.eccentricities_arcsec[e]), thresholds[e]});
    std::sort(sorted.begin(), sorted.end());
    // Allow one refinement step of slack between neighbouring conditions.
    const double slack = std::pow(rc.grid_ratio, 1.0 / (1 << rc.refinements));
    for (std::size_t i = 1; i < sorted.size(); ++i)
      if (sorted[i].second * slack < sorted[i - 1].second) monotone = false;
  }
  nlohmann::json s;
  s["experiment"] = "anstis";
  s["seed"] = cfg.seed;
  s["config"] = {{"observer", cfg.observer.to_json()},
                 {"recognition", rc.to_json()},
                 {"eccentricities_arcsec", cfg.eccentricities_arcsec},
                 {"start_size_factor", cfg.start_size_factor},
                 {"max_size_factor", cfg.max_size_factor}};
  s["points"] = points;
  s["plateau_radius_arcsec"] = plateau;
  s["inferred_foveola_radius_arcsec"] =
      infer_foveola_radius(spec.slope_a, spec.s_min() * 2.0).arcsec();
  s["plateau_cv"] = plat.size() >= 2 ? nlohmann::json(coefficient_of_variation(plat)) : nlohmann::json();
  s["plateau_points"] = plat.size();
  if (lin_x.size() >= 2) {
    s["linear_fit"] = fit_json(fit_line(lin_x, lin_y));
    s["origin_fit"] = fit_json(fit_through_origin(lin_x, lin_y));
  }
  s["monotone"] = monotone;
  s["censored_points"] = std::count(censored.begin(), censored.end(), true);
  s["similarity"] = "band-weighted cosine over fragments, weights 2^-i";
  r.summary = s;
  r.censored_only = std::all_of(censored.begin(), censored.end(), [](bool c) { return c; });

  Plot p;
  p.title = "Letter threshold size vs eccentricity";
  p.x_label = "eccentricity (arcmin)";
  p.y_label = "threshold size (arcmin)";
  Series meas{"measured", {}, {}, false, true};
  for (std::size_t e = 0; e < thresholds.size(); ++e)
    if (!censored[e]) {
      meas.x.push_back(cfg.eccentricities_arcsec[e] / 60.0);
      meas.y.push_back(thresholds[e] / 60.0);
    }
  p.series.push_back(meas);
  if (lin_x.size() >= 2) {
    const LinearFit f = fit_line(lin_x, lin_y);
    Series fit{"linear fit", {}, {}, true, false};
    const double xa = plateau, xb = *std::max_element(lin_x.begin(), lin_x.end());
    fit.x = {xa / 60.0, xb / 60.0};
    fit.y = {(f.slope * xa + f.intercept) / 60.0, (f.slope * xb + f.intercept) / 60.0};
    p.series.push_back(fit);
  }
  r.plots.push_back({"anstis_threshold", p});
  return r;
}

// ---- scale invariance ------------------------------------------------------

ExperimentResult scale_invariance_curve(const ScaleConfig& cfg) {
  const LatticeSpec& spec = cfg.observer.spec;
  spec.validate();
  if (!has_glyph(cfg.glyph)) throw ConfigError(std::string("no glyph for '") + cfg.glyph + "'");
  const double f = band_factor(spec);
  if (cfg.center_band < 0 || cfg.center_band >= spec.n_s())
    throw ConfigError("center_band outside the band list");
  if (std::find(cfg.exponents.begin(), cfg.exponents.end(), 0) == cfg.exponents.end())
    throw ConfigError("scale exponents must include 0");
  const TemplateBank bank = cfg.observer.make_bank();
  const double ppd = cfg.observer.pixels_per_degree;
  const double s_c = spec.bands[cfg.center_band].radius.arcsec();
  const double s_min = spec.s_min().arcsec(), s_max = spec.s_max().arcsec();
  ExtractOptions opts;
  opts.threads = cfg.observer.threads;

  std::vector<int> exps = cfg.exponents;
  std::sort(exps.begin(), exps.end());
  std::map<int, IPFragment> frags;
  for (int k : exps) {
    const double s_k = s_c * std::pow(f, k);
    const Stimulus letter =
        render_letter(cfg.glyph, AngularLength::from_arcsec(cfg.letter_size_factor * s_k), ppd);
    const Stimulus bp = bandpass_stimulus(letter, ScaleBand{k, AngularLength::from_arcsec(s_k)},
                                          cfg.observer.gabor.wavelength_ratio);
    frags.emplace(k, extract(render_patch_scene(bp, 0.0, 0.0), spec, bank, opts));
  }
  const std::vector<double> ref = band_values(frags.at(0), cfg.center_band);

  ExperimentResult r;
  r.name = "scale";
  r.trials = Table({"exponent", "band", "similarity"});
  r.conditions = Table({"exponent", "factor", "content_radius_arcsec", "in_range", "best_band", "similarity"});
  double min_in = HUGE_VAL, max_out_lo = -HUGE_VAL, max_out_hi = -HUGE_VAL;
  Series curve{"similarity", {}, {}, true, true};
  nlohmann::json points = nlohmann::json::array();
  std::map<int, double> sim;
  for (int k : exps) {
    const double s_k = s_c * std::pow(f, k);
    const bool in_range = s_k >= s_min * (1 - 1e-9) && s_k <= s_max * (1 + 1e-9);
    int best = 0;
    sim[k] = -HUGE_VAL;
    for (int b = 0; b < spec.n_s(); ++b) {
      const double v = pearson(ref, band_values(frags.at(k), b));
      r.trials.add_row({std::to_string(k), std::to_string(b), num(v)});
      if (v > sim[k]) sim[k] = v, best = b;
    }
    if (in_range) min_in = std::min(min_in, sim[k]);
    else if (s_k < s_min) max_out_lo = std::max(max_out_lo, sim[k]);
    else max_out_hi = std::max(max_out_hi, sim[k]);
    r.conditions.add_row({std::to_string(k), num(std::pow(f, k)), num(s_k), in_range ? "1" : "0",
                          std::to_string(best), num(sim[k])});
    curve.x.push_back(k * std::log2(f));
    curve.y.push_back(sim[k]);
    points.push_back({{"exponent", k}, {"factor", std::pow(f, k)}, {"similarity", sim[k]},
                      {"best_band", best}, {"in_range", in_range}});
  }
  int lo_k = 0, hi_k = 0;
  while (sim.count(lo_k - 1) && sim[lo_k - 1] >= cfg.threshold) --lo_k;
  while (sim.count(hi_k + 1) && sim[hi_k + 1] >= cfg.threshold) ++hi_k;
  nlohmann::json s;
  s["experiment"] = "scale";
  s["config"] = {{"observer", cfg.observer.to_json()},    {"glyph", std::string(1, cfg.glyph)},
                 {"center_band", cfg.center_band},         {"letter_size_factor", cfg.letter_size_factor},
                 {"exponents", cfg.exponents},             {"threshold", cfg.threshold}};
  s["points"] = points;
  s["invariance_range_factors"] = {std::pow(f, lo_k), std::pow(f, hi_k)};
  s["min_similarity_in_range"] = min_in;
  s["max_similarity_below_s_min"] =
      max_out_lo > -HUGE_VAL ? nlohmann::json(max_out_lo) : nlohmann::json();
  s["max_similarity_above_s_max"] =
      max_out_hi > -HUGE_VAL ? nlohmann::json(max_out_hi) : nlohmann::json();
  s["similarity"] = "max over bands of the Pearson correlation with the reference band slice";
  r.summary = s;
  Plot p;
  p.title = "Similarity vs scaling";
  p.x_label = "log2 scale factor";
  p.y_label = "similarity";
  p.series.push_back(curve);
  p.reference_y = cfg.threshold;
  r.plots.push_back({"scale_similarity", p});
  return r;
}

// ---- translation invariance ------------------------------------------------

ExperimentResult translation_invariance_curve(const TranslationConfig& cfg) {
  const LatticeSpec& spec = cfg.observer.spec;
  spec.validate();
  if (!has_glyph(cfg.glyph)) throw ConfigError(std::string("no glyph for '") + cfg.glyph + "'");
  if (cfg.max_steps < 1 || !(cfg.step_factor > 0.0)) throw ConfigError("bad shift sweep");
  const TemplateBank bank = cfg.observer.make_bank();
  const double ppd = cfg.observer.pixels_per_degree;
  const double k = ppd / 3600.0;

  ExperimentResult r;
  r.name = "translation";
  r.trials = Table({"band", "radius_arcsec", "step", "shift_arcsec", "similarity"});
  r.conditions = Table({"band", "radius_arcsec", "half_range_arcsec", "half_range_in_radii", "censored"});
  Plot curves;
  curves.title = "Similarity vs shift";
  curves.x_label = "shift (arcmin)";
  curves.y_label = "similarity";
  curves.reference_y = cfg.threshold;

  std::vector<double> radii, ranges;
  nlohmann::json points = nlohmann::json::array();
  for (int b = 0; b < spec.n_s(); ++b) {
    const double s_b = spec.bands[b].radius.arcsec();
    const Stimulus letter =
        render_letter(cfg.glyph, AngularLength::from_arcsec(cfg.letter_size_factor * s_b), ppd);
    const Stimulus bp = bandpass_stimulus(letter, spec.bands[b], cfg.observer.gabor.wavelength_ratio);
    std::vector<double> sims(cfg.max_steps + 1), shifts(cfg.max_steps + 1);
    ExtractOptions opts;
    opts.bands = {b};
    for (int j = 0; j <= cfg.max_steps; ++j) shifts[j] = std::lround(j * cfg.step_factor * s_b * k) / k;
    std::vector<std::vector<double>> all(cfg.max_steps + 1);
    parallel_for(cfg.max_steps + 1, cfg.observer.threads, [&](int j) {
      all[j] = position_pooled_band(extract(render_patch_scene(bp, shifts[j], 0.0), spec, bank, opts), b);
    });
    double half = 0.0;
    bool broken = false;
    Series sr{"band " + std::to_string(b), {}, {}, true, false};
    for (int j = 0; j <= cfg.max_steps; ++j) {
      sims[j] = pearson(all[j], all[0]);
      if (!broken && sims[j] >= cfg.threshold) half = shifts[j];
      else broken = true;
      r.trials.add_row({std::to_string(b), num(s_b), std::to_string(j), num(shifts[j]), num(sims[j])});
      sr.x.push_back(shifts[j] / 60.0);
      sr.y.push_back(sims[j]);
    }
    const bool censored = !broken;
    r.conditions.add_row({std::to_string(b), num(s_b), num(half), num(half / s_b), censored ? "1" : "0"});
    points.push_back({{"band", b}, {"radius_arcsec", s_b}, {"half_range_arcsec", half}, {"censored", censored}});
    curves.series.push_back(sr);
    if (!censored) {
      radii.push_back(s_b);
      ranges.push_back(half);
    }
  }
  nlohmann::json s;
  s["experiment"] = "translation";
  s["config"] = {{"observer", cfg.observer.to_json()},   {"glyph", std::string(1, cfg.glyph)},
                 {"letter_size_factor", cfg.letter_size_factor}, {"step_factor", cfg.step_factor},
                 {"max_steps", cfg.max_steps},           {"threshold", cfg.threshold}};
  s["points"] = points;
  s["n_x"] = spec.n_x;
  if (radii.size() >= 2) {
    s["origin_fit"] = fit_json(fit_through_origin(radii, ranges));
    s["linear_fit"] = fit_json(fit_line(radii, ranges));
  }
  bool monotone = true;
  for (std::size_t i = 1; i < ranges.size(); ++i) monotone &= ranges[i] >= ranges[i - 1];
  s["monotone"] = monotone;
  s["similarity"] = "Pearson correlation of column-max-pooled band slices";
  r.summary = s;
  r.censored_only = radii.empty();
  r.plots.push_back({"translation_similarity", curves});
  Plot hr;
  hr.title = "Invariance half-range vs band radius";
  hr.x_label = "band radius (arcsec)";
  hr.y_label = "half-range (arcsec)";
  hr.series.push_back({"measured", radii, ranges, false, true});
  if (radii.size() >= 2) {
    const LinearFit f = fit_through_origin(radii, ranges);
    const double xb = *std::max_element(radii.begin(), radii.end());
    hr.series.push_back({"fit through origin", {0.0, xb}, {0.0, f.slope * xb}, true, false});
  }
  r.plots.push_back({"translation_half_range", hr});
  return r;
}

// ---- crowding ----------------------------------------------------------------

std::string to_string(FlankerLayout f) {
  switch (f) {
    case FlankerLayout::Tangential: return "tangential";
    case FlankerLayout::Radial: return "radial";
    case FlankerLayout::RadialInner: return "radial-inner";
  }
  return "tangential";
}

FlankerLayout flanker_layout_from_string(const std::string& s) {
  if (s == "tangential") return FlankerLayout::Tangential;
  if (s == "radial") return FlankerLayout::Radial;
  if (s == "radial-inner") return FlankerLayout::RadialInner;
  throw ConfigError("unknown flanker layout '" + s + "'");
}

std::vector<StageSpec> crowding_stage_chain() {
  std::vector<StageSpec> out;
  for (int k = 2; k <= 5; ++k) {
    StageSpec s;
    s.index = k;
    s.scale_pool = false;
    out.push_back(s);
  }
  return out;
}

ExperimentResult crowding_experiment(const CrowdingConfig& cfg) {
  const RecognitionConfig& rc = cfg.recognition;
  check_alphabet(rc.alphabet);
  if (rc.alphabet.size() < 2) throw ConfigError("crowding needs at least two letters");
  if (cfg.eccentricities_arcsec.empty()) throw ConfigError("no eccentricities given");
  if (cfg.read_stages.empty()) throw ConfigError("no read stages given");
  const LatticeSpec& spec = cfg.observer.spec;
  spec.validate();
  const int max_stage = 1 + static_cast<int>(cfg.stages.size());
  for (int k : cfg.read_stages)
    if (k < 1 || k > max_stage) throw ConfigError("read stage " + std::to_string(k) + " is not in the chain");
  for (const auto& st : cfg.stages)
    if (st.scale_pool) throw ConfigError("crowding reads one band; disable scale_pool in its stages");
  const TemplateBank bank = cfg.observer.make_bank();
  const auto ladder = spec.ladder();
  const double ppd = cfg.observer.pixels_per_degree;
  const bool two_d = spec.dimensionality == Dimensionality::TwoD;
  const int n_letters = static_cast<int>(rc.alphabet.size());
  const int n_read = static_cast<int>(cfg.read_stages.size());
  ExtractOptions opts;
  opts.threads = 1;

  // Stage templates from isolated letters on the finest band at fixation.
  std::vector<StageArray> corpus;
  for (char c : rc.alphabet) {
    const double size = cfg.target_size_factor * ladder[0].radius.arcsec();
    ExtractOptions o = opts;
    o.bands = {0};
    corpus.push_back(band_slice(extract(render_scene({{c, 0.0, 0.0, size}}, ppd), spec, bank, o), 0));
  }
  const auto templates = learn_templates(corpus, cfg.stages, mix_seed(cfg.seed, 0x7e3),
                                         cfg.random_template_fraction);

  ExperimentResult r;
  r.name = "crowding";
  r.trials = Table({"eccentricity_arcsec", "spacing_arcsec", "letter", "trial", "flankers", "read_stage",
                    "predicted", "correct"});
  r.conditions = Table({"eccentricity_arcsec", "read_band", "read_radius_arcsec", "read_stage",
                        "isolated_accuracy", "critical_spacing_arcsec", "critical_spacing_in_radii",
                        "censored"});

  std::map<int, std::vector<double>> xs, ys;
  nlohmann::json points = nlohmann::json::array();
  bool all_censored = true;
  for (double x : cfg.eccentricities_arcsec) {
    const int band = covering_band(x, spec);
    const double s_b = ladder[band].radius.arcsec();
    const double size = cfg.target_size_factor * s_b;
    ExtractOptions o = opts;
    o.bands = {band};
    const int w = spec.width();
    const int c_lo = std::clamp(static_cast<int>(std::floor((x - 0.5 * size) / s_b)) + spec.n_x, 0, w - 1);
    const int c_hi = std::clamp(static_cast<int>(std::ceil((x + 0.5 * size) / s_b)) + spec.n_x, 0, w - 1);
    const int r_lo = two_d ? std::clamp(static_cast<int>(std::floor(-0.5 * size / s_b)) + spec.n_x, 0, w - 1) : 0;
    const int r_hi = two_d ? std::clamp(static_cast<int>(std::ceil(0.5 * size / s_b)) + spec.n_x, 0, w - 1) : 0;

    auto readouts = [&](const RetinalImage& scene) {
      const auto h = run_hierarchy(band_slice(extract(scene, spec, bank, o), band), cfg.stages, templates);
      std::vector<std::vector<double>> out;
      for (int k : cfg.read_stages) {
        if (k > static_cast<int>(h.stages.size())) throw ConfigError("hierarchy stopped before the read stage");
        const LatticeTensor& t = h.stages[k - 1].data;
        std::vector<double> v;
        const int u0 = stage_unit(c_lo, k), u1 = std::min(stage_unit(c_hi, k), t.width - 1);
        const int v0 = two_d ? stage_unit(r_lo, k) : 0;
        const int v1 = two_d ? std::min(stage_unit(r_hi, k), t.height - 1) : 0;
        for (int ux = u0; ux <= u1; ++ux)
          for (int uy = v0; uy <= v1; ++uy)
            for (int c = 0; c < t.channels; ++c) v.push_back(t.at(0, ux, uy, c));
        out.push_back(std::move(v));
      }
      return out;
    };

    // gallery[stage][letter * n_offsets + offset]: clean letters on a grid
    // spanning the jitter range.
    std::vector<double> offsets{0.0};
    if (rc.jitter_fraction > 0.0) offsets = {-rc.jitter_fraction * s_b, 0.0, rc.jitter_fraction * s_b};
    const int n_offsets = static_cast<int>(offsets.size() * offsets.size());
    std::vector<std::vector<std::vector<double>>> gallery(n_read);
    for (auto& g : gallery) g.resize(static_cast<std::size_t>(n_letters) * n_offsets);
    parallel_for(n_letters * n_offsets, cfg.observer.threads, [&](int i) {
      const int li = i / n_offsets;
      const int o = i % n_offsets;
      const double dx = offsets[o / offsets.size()], dy = offsets[o % offsets.size()];
      const auto ro = readouts(render_scene({{rc.alphabet[li], x + dx, dy, size}}, ppd));
      for (int k = 0; k < n_read; ++k) gallery[k][i] = ro[k];
    });

    // Accuracy per read stage at one spacing; spacing <= 0 means no flankers.
    std::map<double, std::vector<double>> cache;
    auto accuracy_all = [&](double spacing) -> const std::vector<double>& {
      auto it = cache.find(spacing);
      if (it != cache.end()) return it->second;
      const int n = n_letters * rc.trials;
      std::vector<std::vector<int>> pred(n);
      std::vector<std::string> flank(n);
      parallel_for(n, cfg.observer.threads, [&](int i) {
        const int li = i / rc.trials;
        const int t = i % rc.trials;
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(li), static_cast<std::uint64_t>(t)));
        const double jx = rng.uniform(-1.0, 1.0) * rc.jitter_fraction * s_b;
        const double jy = rng.uniform(-1.0, 1.0) * rc.jitter_fraction * s_b;
        std::vector<Placement> scene{{rc.alphabet[li], x + jx, jy, size}};
        auto other = [&] {
          const int k = static_cast<int>(rng.below(n_letters - 1));
          return rc.alphabet[k >= li ? k + 1 : k];
        };
        const char f1 = other();
        const char f2 = other();
        if (spacing > 0.0) {
          switch (cfg.layout) {
            case FlankerLayout::Tangential:
              scene.push_back({f1, x + jx, jy - spacing, size});
              scene.push_back({f2, x + jx, jy + spacing, size});
              flank[i] = std::string{f1, f2};
              break;
            case FlankerLayout::Radial:
              scene.push_back({f1, x + jx - spacing, jy, size});
              scene.push_back({f2, x + jx + spacing, jy, size});
              flank[i] = std::string{f1, f2};
              break;
            case FlankerLayout::RadialInner:
              scene.push_back({f1, x + jx - spacing, jy, size});
              flank[i] = std::string{f1};
              break;
          }
        }
        const auto ro = readouts(render_scene(scene, ppd, rc.noise_sigma, &rng));
        pred[i].resize(n_read);
        for (int k = 0; k < n_read; ++k) pred[i][k] = nn_classify(ro[k], gallery[k], cfg.metric) / n_offsets;
      });
      std::vector<double> acc(n_read, 0.0);
      for (int i = 0; i < n; ++i) {
        const int li = i / rc.trials;
        for (int k = 0; k < n_read; ++k) {
          const bool ok = pred[i][k] == li;
          acc[k] += ok;
          r.trials.add_row({num(x), spacing > 0.0 ? num(spacing) : "inf", std::string(1, rc.alphabet[li]),
                            std::to_string(i % rc.trials), flank[i], std::to_string(cfg.read_stages[k]),
                            std::string(1, rc.alphabet[pred[i][k]]), ok ? "1" : "0"});
        }
      }
      for (double& a : acc) a /= n;
      return cache.emplace(spacing, acc).first->second;
    };

    const std::vector<double> isolated = accuracy_all(0.0);
    for (int k = 0; k < n_read; ++k) {
      const int stage = cfg.read_stages[k];
      const SearchResult sr = threshold_search(size, size, std::max(cfg.max_spacing_factor * s_b, size), rc.grid_ratio,
                                               rc.refinements, rc.criterion,
                                               [&](double sp) { return accuracy_all(sp)[k]; });
      r.conditions.add_row({num(x), std::to_string(band), num(s_b), std::to_string(stage), num(isolated[k]),
                            num(sr.threshold), num(sr.threshold / s_b), sr.censored ? "1" : "0"});
      points.push_back({{"eccentricity_arcsec", x}, {"read_stage", stage}, {"critical_spacing_arcsec", sr.threshold},
                        {"censored", sr.censored}, {"isolated_accuracy", isolated[k]}});
      if (!sr.censored) {
        all_censored = false;
        xs[stage].push_back(x);
        ys[stage].push_back(sr.threshold);
      }
    }
  }

  nlohmann::json s;
  s["experiment"] = "crowding";
  s["seed"] = cfg.seed;
  nlohmann::json stages_json = nlohmann::json::array();
  for (const auto& st : cfg.stages)
    stages_json.push_back({{"index", st.index}, {"pool", to_string(st.pool)}, {"s_stage", st.s_stage},
                           {"n_templates", st.n_templates}, {"template_size", st.template_size}});
  s["config"] = {{"observer", cfg.observer.to_json()},
                 {"recognition", rc.to_json()},
                 {"eccentricities_arcsec", cfg.eccentricities_arcsec},
                 {"stages", stages_json},
                 {"read_stages", cfg.read_stages},
                 {"target_size_factor", cfg.target_size_factor},
                 {"layout", to_string(cfg.layout)},
                 {"max_spacing_factor", cfg.max_spacing_factor},
                 {"random_template_fraction", cfg.random_template_fraction}};
  s["points"] = points;
  nlohmann::json fits = nlohmann::json::object();
  std::vector<double> slopes;
  Plot p;
  p.title = "Critical spacing vs eccentricity";
  p.x_label = "eccentricity (arcmin)";
  p.y_label = "critical spacing (arcmin)";
  for (int stage : cfg.read_stages) {
    nlohmann::json fj;
    Series ser{"stage " + std::to_string(stage), {}, {}, true, true};
    for (std::size_t i = 0; i < xs[stage].size(); ++i) {
      ser.x.push_back(xs[stage][i] / 60.0);
      ser.y.push_back(ys[stage][i] / 60.0);
    }
    p.series.push_back(ser);
    fj["model_rf_slope"] = stage_rf_slope(stage, spec.slope_a);
    if (xs[stage].size() >= 2) {
      const LinearFit f = fit_line(xs[stage], ys[stage]);
      fj["linear_fit"] = fit_json(f);
      fj["origin_fit"] = fit_json(fit_through_origin(xs[stage], ys[stage]));
      slopes.push_back(f.slope);
    } else {
      slopes.push_back(std::nan(""));
    }
    fits[std::to_string(stage)] = fj;
  }
  s["fits"] = fits;
  nlohmann::json ratios = nlohmann::json::array();
  for (std::size_t i = 1; i < slopes.size(); ++i)
    ratios.push_back(std::isfinite(slopes[i]) && std::isfinite(slopes[i - 1]) && slopes[i - 1] != 0.0
                         ? nlohmann::json(slopes[i] / slopes[i - 1])
                         : nlohmann::json());
  s["consecutive_slope_ratios"] = ratios;
  s["readout"] = "units of the read stage covering the target columns, band = finest band covering the target";
  r.summary = s;
  r.censored_only = all_censored;
  r.plots.push_back({"crowding_spacing", p});
  return r;
}

}  // namespace pyrafove
