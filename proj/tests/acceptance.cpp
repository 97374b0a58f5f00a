// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "generators.hpp"
#include "pyrafove/config.hpp"
#include "pyrafove/experiments.hpp"
#include "pyrafove/fragment.hpp"
#include "pyrafove/geometry.hpp"
#include "pyrafove/hierarchy.hpp"
#include "pyrafove/image.hpp"
#include "pyrafove/stimulus.hpp"

using namespace pyrafove;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

RunConfig shipped(const std::string& name) {
  RunConfig c = load_run_config(std::string(PYRAFOVE_SOURCE_DIR) + "/configs/" + name);
  apply_overrides(c, std::nullopt, 1, std::nullopt);
  return c;
}

// ---- 1 ------------------------------------------------------------------
Outcome foveola_arithmetic() {
  const auto t0 = Clock::now();
  const double r = infer_foveola_radius(0.1, AngularLength::from_arcsec(80.0)).arcsec();
  const double elapsed = seconds_since(t0);
  const double extent_arcmin = 2.0 * r / 60.0;
  const int cells = static_cast<int>(std::floor(1560.0 / 40.0));
  const bool ok = std::fabs(r - 800.0) < 1e-9 && std::fabs(r / 60.0 - 13.333) < 0.001 &&
                  std::fabs(extent_arcmin - 26.667) < 0.001 && cells >= 39 && cells <= 40 && elapsed < 1e-3;
  return {ok, "R = " + fmt(r) + "\" (" + fmt(r / 60.0) + "'), extent " + fmt(extent_arcmin) + "', cells " +
                  std::to_string(cells) + ", " + fmt(elapsed * 1e6, 3) + " us"};
}

// ---- 2 ------------------------------------------------------------------
Outcome square_lattice() {
  Rng rng(0x5a17);
  int failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto spec = gen::random_pyramid_spec(rng);
    const auto counts = points_per_band(build_lattice(spec), spec.n_s());
    const int expect = static_cast<int>(std::lround(std::pow(2 * spec.n_x + 1, spec.dims())));
    for (int c : counts)
      if (c != expect) {
        ++failures;
        break;
      }
  }
  return {failures == 0, "100 random specs, " + std::to_string(failures) + " failures"};
}

// ---- 3 ------------------------------------------------------------------
Outcome commutativity() {
  Rng rng(0xc0ffee);
  int failures = 0;
  long compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto f = gen::random_fragment(rng);
    const int dx = static_cast<int>(rng.below(7)) - 3;
    const int dy = static_cast<int>(rng.below(7)) - 3;
    const int ds = static_cast<int>(rng.below(5)) - 2;
    const auto a = shift_fragment(scale_shift_fragment(f, ds), dx, dy);
    const auto b = scale_shift_fragment(shift_fragment(f, dx, dy), ds);
    bool ok = a.data.same_shape(b.data);
    for (std::size_t i = 0; ok && i < a.data.size(); ++i) {
      if (a.data.flags[i] || b.data.flags[i]) continue;
      ++compared;
      ok = a.data.values[i] == b.data.values[i];
    }
    if (!ok) ++failures;
  }
  return {failures == 0, "1000 random fragments, " + std::to_string(compared) + " interior entries, " +
                             std::to_string(failures) + " failures"};
}

// ---- 4 ------------------------------------------------------------------
// Smooth random scene: Gaussian blobs plus a blurred letter.
Image covariance_scene(int n, Rng& rng) {
  Image img(n, n, 0.5);
  const int blobs = 6 + n / 16;
  for (int b = 0; b < blobs; ++b) {
    const double cx = rng.uniform(0, n), cy = rng.uniform(0, n);
    const double sigma = rng.uniform(3.0, std::max(4.0, n / 10.0));
    const double amp = rng.uniform(-0.3, 0.3);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        img.at(x, y) += amp * std::exp(-d2 / (2 * sigma * sigma));
      }
  }
  Image letter(n, n, 0.0);
  draw_letter(letter, sloan_letters()[rng.below(sloan_letters().size())], n / 4.0, n / 2.0 + rng.uniform(-4, 4),
              n / 2.0 + rng.uniform(-4, 4));
  // Separable [1 4 6 4 1] blur keeps the letter away from the pixel grid limit.
  const double k[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
  Image tmp(n, n, 0.0), blurred(n, n, 0.0);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int i = -2; i <= 2; ++i) tmp.at(x, y) += k[i + 2] * letter.get(x + i, y);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int i = -2; i <= 2; ++i) blurred.at(x, y) += k[i + 2] * tmp.get(x, y + i);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] += 0.4 * blurred.data[i];
  clamp01(img);
  return img;
}

Outcome scale_covariance() {
  const double ppd = 360.0;  // 10"/px
  const auto t0 = Clock::now();
  double worst = 0.0;
  long compared = 0;
  std::string per;
  Rng rng(0x5ca1e);
  for (int n : {64, 128, 256, 512}) {
    // Bands 40"..(n/8 px), n_x = 8; fixation on pixel (n/2, n/2).
    auto spec = make_lattice_spec(
        geometric_bands(AngularLength::from_arcsec(40.0), AngularLength::from_arcsec(n / 8.0 * 10.0), 2.0), 0.125,
        Dimensionality::TwoD);
    spec.geometric_factor = 2.0;
    const auto bank = make_bank(spec, 4, GaborParams{}, ppd, 0.02);
    ExtractOptions brute;
    brute.fast = false;
    const Image img = covariance_scene(n, rng);
    const double c = n / 2.0;
    RetinalImage orig;
    orig.pixels = img;
    orig.pixels_per_degree = ppd;
    orig.fixation_x = orig.fixation_y = AngularLength::from_arcsec(5.0);
    RetinalImage scaled = orig;
    scaled.pixels = scale_image(img, 2.0, c, c);
    const auto fo = extract(orig, spec, bank, brute);
    const auto fs_ = extract(scaled, spec, bank, brute);
    const auto pred = scale_shift_fragment(fo, 1);
    double sum = 0.0;
    long count = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
      if (pred.data.flags[i] || fs_.data.flags[i]) continue;
      sum += std::fabs(pred.data.values[i] - fs_.data.values[i]);
      ++count;
    }
    const double mad = count ? sum / count : HUGE_VAL;
    worst = std::max(worst, mad);
    compared += count;
    per += (per.empty() ? "" : ", ") + std::to_string(n) + ": " + fmt(mad, 3);
  }
  const double elapsed = seconds_since(t0);
  return {worst <= 0.05 && elapsed <= 60.0,
          "interior MAD " + per + " (" + std::to_string(compared) + " entries), " + fmt(elapsed, 3) + " s"};
}

// ---- 5 ------------------------------------------------------------------
Outcome translation_law() {
  const auto cfg = shipped("translation.json");
  const auto t0 = Clock::now();
  const auto r = translation_invariance_curve(*cfg.translation);
  const double elapsed = seconds_since(t0);
  const auto& s = r.summary;
  if (!s.contains("origin_fit")) return {false, "fewer than two uncensored bands"};
  const double slope = s["origin_fit"]["slope"].get<double>();
  const double r2 = s["origin_fit"]["r2"].get<double>();
  const int n_x = s["n_x"].get<int>();
  const bool ok = slope >= n_x / 2.0 && slope <= 2.0 * n_x && r2 >= 0.9 && elapsed <= 300.0;
  return {ok, "slope " + fmt(slope) + " in [" + fmt(n_x / 2.0) + ", " + fmt(2.0 * n_x) + "], R2 " + fmt(r2) + ", " +
                  fmt(elapsed, 3) + " s"};
}

// ---- 6 ------------------------------------------------------------------
Outcome anstis() {
  const auto cfg = shipped("anstis.json");
  const auto t0 = Clock::now();
  const auto r = anstis_experiment(*cfg.anstis);
  const double elapsed = seconds_since(t0);
  const auto& s = r.summary;
  if (!s.contains("linear_fit") || s["plateau_cv"].is_null()) return {false, "not enough uncensored points"};
  const double r2 = s["linear_fit"]["r2"].get<double>();
  const double cv = s["plateau_cv"].get<double>();
  const bool ok = r2 >= 0.9 && cv <= 0.10 && elapsed <= 600.0;
  return {ok, "linear R2 " + fmt(r2) + ", plateau CV " + fmt(cv) + " over " +
                  std::to_string(s["plateau_points"].get<int>()) + " points, " + fmt(elapsed, 3) + " s"};
}

// ---- 7 ------------------------------------------------------------------
Outcome scale_range() {
  const auto cfg = shipped("scale.json");
  const auto t0 = Clock::now();
  const auto r = scale_invariance_curve(*cfg.scale);
  const double elapsed = seconds_since(t0);
  const auto& s = r.summary;
  if (s["max_similarity_below_s_min"].is_null() || s["max_similarity_above_s_max"].is_null())
    return {false, "sweep does not leave the band range on both sides"};
  const double in = s["min_similarity_in_range"].get<double>();
  const double lo = s["max_similarity_below_s_min"].get<double>();
  const double hi = s["max_similarity_above_s_max"].get<double>();
  const bool ok = in >= 0.8 && lo < 0.8 && hi < 0.8 && elapsed <= 300.0;
  return {ok, "in range min " + fmt(in) + ", below s_min max " + fmt(lo) + ", above s_max max " + fmt(hi) + ", " +
                  fmt(elapsed, 3) + " s"};
}

// ---- 8 ------------------------------------------------------------------
Outcome crowding() {
  const auto cfg = shipped("crowding.json");
  const auto t0 = Clock::now();
  const auto r = crowding_experiment(*cfg.crowding);
  const double elapsed = seconds_since(t0);
  const auto& s = r.summary;
  bool ok = elapsed <= 900.0;
  std::string detail;
  for (int stage : cfg.crowding->read_stages) {
    const auto& fj = s["fits"][std::to_string(stage)];
    if (!fj.contains("linear_fit")) {
      ok = false;
      detail += "stage " + std::to_string(stage) + ": censored; ";
      continue;
    }
    const double r2 = fj["linear_fit"]["r2"].get<double>();
    ok &= r2 >= 0.85;
    detail += "stage " + std::to_string(stage) + " slope " + fmt(fj["linear_fit"]["slope"].get<double>()) + " R2 " +
              fmt(r2) + "; ";
  }
  if (s["consecutive_slope_ratios"].empty()) ok = false;
  for (const auto& q : s["consecutive_slope_ratios"]) {
    if (q.is_null()) {
      ok = false;
      detail += "ratio n/a; ";
      continue;
    }
    const double v = q.get<double>();
    ok &= std::fabs(v - 2.0) <= 0.5;
    detail += "ratio " + fmt(v) + "; ";
  }
  return {ok, detail + fmt(elapsed, 3) + " s"};
}

// ---- 9 ------------------------------------------------------------------
Outcome decimation() {
  const auto t0 = Clock::now();
  Rng rng(41);
  StageArray a;
  a.data = LatticeTensor(5, 41, 41, 4);
  a.two_d = true;
  for (auto& v : a.data.values) v = rng.uniform();
  a.spacing_arcsec = {40, 80, 160, 320, 640};
  std::vector<int> widths, bands;
  for (int k = 2; k <= 5; ++k) {
    StageSpec spec;
    spec.index = k;
    spec.s_stage = false;
    spec.scale_pool = true;
    auto next = c_pool(a, spec);
    if (!next) return {false, "pooling stopped at stage " + std::to_string(k)};
    a = *next;
    widths.push_back(a.data.width);
    bands.push_back(a.data.n_s);
  }
  const double elapsed = seconds_since(t0);
  const bool ok = widths == std::vector<int>{21, 11, 6, 3} && width_chain(41, 4).back() == 3 && bands.back() == 1 &&
                  elapsed < 1.0;
  std::string w, b;
  for (int v : widths) w += std::to_string(v) + " ";
  for (int v : bands) b += std::to_string(v) + " ";
  return {ok, "widths 41 -> " + w + "| bands 5 -> " + b + "| " + fmt(elapsed * 1e3, 3) + " ms"};
}

// ---- 10 -----------------------------------------------------------------
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = s.str();
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path work = fs::temp_directory_path() / "pyrafove_acceptance_cli";
  fs::remove_all(work);
  fs::create_directories(work);
  RetinalImage scene = render_scene({{'R', 400.0, -200.0, 300.0}, {'K', -900.0, 300.0, 500.0}}, 360.0, 0.05, nullptr);
  Rng noise(5);
  add_noise(scene.pixels, 0, 0, scene.pixels.width - 1, scene.pixels.height - 1, 0.02, noise);
  const fs::path image = work / "scene.pgm";
  write_pgm(scene.pixels, image.string());

  const std::string cli = PYRAFOVE_CLI;
  const std::string cfgdir = std::string(PYRAFOVE_SOURCE_DIR) + "/configs/";
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"lattice", "lattice --config " + cfgdir + "default.json"},
      {"fragment", "fragment " + image.string() + " --csv --config " + cfgdir + "fragment_2d.json"},
      {"hierarchy", "hierarchy " + image.string() + " --config " + cfgdir + "fragment_2d.json"},
      {"anstis", "experiment anstis --config " + cfgdir + "quick.json"},
      {"scale", "experiment scale --config " + cfgdir + "quick.json"},
      {"translation", "experiment translation --config " + cfgdir + "quick.json"},
      {"crowding", "experiment crowding --config " + cfgdir + "quick.json"},
  };
  bool ok = true;
  std::string detail;
  for (const auto& [name, args] : commands) {
    const fs::path out = work / name;
    std::map<std::string, std::string> runs[2];
    std::string logs[2];
    int codes[2];
    for (int run = 0; run < 2; ++run) {
      fs::remove_all(out);
      const fs::path log = work / (name + ".log");
      const std::string cmd = cli + " " + args + " --threads 1 --out " + out.string() + " > " + log.string() + " 2>&1";
      codes[run] = std::system(cmd.c_str());
      runs[run] = snapshot(out);
      logs[run] = slurp(log);
    }
    const bool same = codes[0] == 0 && codes[1] == 0 && !runs[0].empty() && runs[0] == runs[1] && logs[0] == logs[1];
    ok &= same;
    detail += name + (same ? " ok (" + std::to_string(runs[0].size()) + " files)" : " DIFFERS/FAILED") + "; ";
  }
  fs::remove_all(work);
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 foveola arithmetic", foveola_arithmetic},
      {"2 square lattice property", square_lattice},
      {"3 shift/scale-shift commutativity", commutativity},
      {"4 scale covariance (brute force)", scale_covariance},
      {"5 translation-invariance law", translation_law},
      {"6 Anstis linearity and plateau", anstis},
      {"7 scale-invariance range", scale_range},
      {"8 crowding / Bouma", crowding},
      {"9 decimation chain", decimation},
      {"10 CLI determinism", determinism},
  };
  // Optional filter: run only criteria whose number is listed.
  std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const std::string num = name.substr(0, name.find(' '));
    if (!only.empty() && std::find(only.begin(), only.end(), num) == only.end()) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " :: " << o.detail << std::endl;
  }
  return failed ? 1 : 0;
}
