#include <filesystem>

#include "doctest.h"
#include "pyrafove/config.hpp"
#include "pyrafove/errors.hpp"

using namespace pyrafove;

TEST_CASE("empty config takes the defaults") {
  const auto c = parse_run_config("{}");
  CHECK(c.lattice.n_s() == 5);
  CHECK(c.lattice.n_x == 20);
  CHECK(c.bank.pixels_per_degree == 360.0);
  CHECK(c.stages.size() == 4);
  CHECK(c.seed == 1);
  CHECK_FALSE(c.anstis.has_value());
  CHECK_FALSE(c.crowding.has_value());
}

TEST_CASE("full config parses") {
  const auto c = parse_run_config(R"({
    "lattice": {"bands_arcsec_diameter": [80, 160, 320], "slope_a": 0.1, "geometric_factor": 2,
                "dimensionality": "2d"},
    "bank": {"pixels_per_degree": 720, "n_theta": 6},
    "stages": [{"index": 2, "pool": "mean", "scale_pool": false, "n_templates": 8, "template_size": 5,
                "normalization": "template-only"}],
    "fixation_arcsec": [10, -20],
    "seed": 42,
    "threads": 2,
    "experiments": {
      "crowding": {"eccentricities_arcsec": [1200], "layout": "radial", "metric": "cosine",
                   "stages": [{"index": 2, "scale_pool": false}], "read_stages": [2]},
      "anstis": {"recognition": {"trials": 4}}
    }
  })");
  CHECK(c.lattice.n_x == 10);
  CHECK(c.lattice.n_s() == 3);
  CHECK(c.lattice.s_min().arcsec() == doctest::Approx(40.0));
  CHECK(c.lattice.dimensionality == Dimensionality::TwoD);
  CHECK(c.bank.n_theta == 6);
  CHECK(c.stages[0].pool == PoolFunction::Mean);
  CHECK(c.stages[0].normalization == SNormalization::TemplateOnly);
  CHECK(c.fixation_y_arcsec == -20.0);
  REQUIRE(c.crowding.has_value());
  CHECK(c.crowding->layout == FlankerLayout::Radial);
  CHECK(c.crowding->metric == Metric::Cosine);
  CHECK(c.crowding->seed == 42);
  CHECK(c.crowding->observer.threads == 2);
  REQUIRE(c.anstis.has_value());
  CHECK(c.anstis->recognition.trials == 4);
  CHECK(c.anstis->seed == 42);
  CHECK(c.observer().n_theta == 6);
}

TEST_CASE("unknown keys and bad values are config errors") {
  CHECK_THROWS_AS(parse_run_config(R"({"sead": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"bank": {"ppd": 360}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"experiments": {"bouma": {}}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"experiments": {"scale": {"glyph": "E", "zoom": 2}}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"stages": [{"index": 3}]})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"stages": [{"index": 2, "template_size": 4}]})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"seed": "one"})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"lattice": {"slope_a": -1}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"threads": 0})"), ConfigError);
}

TEST_CASE("missing config file is an I/O error") {
  CHECK_THROWS_AS(load_run_config("/nonexistent/pyrafove.json"), IoError);
}

TEST_CASE("overrides reach the experiment blocks") {
  auto c = parse_run_config(R"({"experiments": {"anstis": {}, "scale": {}}})");
  apply_overrides(c, 9, 3, std::string("elsewhere"));
  CHECK(c.seed == 9);
  CHECK(c.output_dir == "elsewhere");
  CHECK(c.anstis->seed == 9);
  CHECK(c.anstis->observer.threads == 3);
  CHECK(c.scale->observer.threads == 3);
  CHECK(resolve_threads(5) == 5);
  CHECK(resolve_threads(std::nullopt) >= 1);
}

TEST_CASE("shipped configs parse") {
  const std::filesystem::path dir = PYRAFOVE_SOURCE_DIR "/configs";
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    CAPTURE(e.path().string());
    CHECK_NOTHROW(load_run_config(e.path().string()));
    ++n;
  }
  CHECK(n >= 5);
}
