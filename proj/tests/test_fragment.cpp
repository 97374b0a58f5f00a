#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "generators.hpp"
#include "pyrafove/errors.hpp"
#include "pyrafove/fragment.hpp"
#include "pyrafove/stimulus.hpp"

using namespace pyrafove;
using namespace pyrafove::literals;

namespace {

bool same_entry(const IPFragment& a, const IPFragment& b, std::size_t i) {
  return a.data.values[i] == b.data.values[i] && a.data.flags[i] == b.data.flags[i];
}

}  // namespace

TEST_CASE("default band weights halve and sum to one") {
  const auto w = default_band_weights(4);
  REQUIRE(w.size() == 4);
  double total = 0;
  for (double v : w) total += v;
  CHECK(total == doctest::Approx(1.0));
  CHECK(w[0] == doctest::Approx(8.0 / 15.0));
  CHECK(w[3] == doctest::Approx(1.0 / 15.0));
}

TEST_CASE("fragment similarity") {
  Rng rng(3);
  auto f = gen::random_fragment(rng);
  CHECK(fragment_similarity(f, f) == doctest::Approx(1.0));
  auto zero = f;
  for (auto& v : zero.data.values) v = 0.0;
  CHECK(fragment_similarity(f, zero) == 0.0);
  auto neg = f;
  for (auto& v : neg.data.values) v = -v;
  CHECK(fragment_similarity(f, neg) == doctest::Approx(-1.0));
  auto other = f;
  other.data = LatticeTensor(f.data.n_s + 1, f.data.width, f.data.height, f.data.channels);
  CHECK_THROWS_AS(fragment_similarity(f, other), ShapeError);

  // Only the first band differs: the score follows the band weights.
  IPFragment a;
  a.n_x = 0;
  a.data = LatticeTensor(2, 1, 1, 1);
  a.data.values = {1.0, 1.0};
  IPFragment b = a;
  b.data.values = {-1.0, 1.0};
  CHECK(fragment_similarity(a, b, {0.75, 0.25}) == doctest::Approx(-0.5));
}

TEST_CASE("shift moves entries and flags vacated ones") {
  Rng rng(4);
  IPFragment f = gen::random_fragment(rng);
  f.two_d = false;
  f.n_x = 3;
  f.data = LatticeTensor(2, 7, 1, 2);
  for (auto& v : f.data.values) v = rng.uniform();
  const auto g = shift_fragment(f, 2);
  for (int s = 0; s < 2; ++s)
    for (int x = -3; x <= 3; ++x)
      for (int c = 0; c < 2; ++c) {
        if (x - 2 >= -3) {
          CHECK(g.at(s, x, 0, c) == f.at(s, x - 2, 0, c));
        } else {
          CHECK(g.at(s, x, 0, c) == 0.0);
          CHECK(g.flagged(s, x, 0, c));
        }
      }
  const auto h = scale_shift_fragment(f, 1);
  for (int x = -3; x <= 3; ++x) {
    CHECK(h.at(1, x, 0, 0) == f.at(0, x, 0, 0));
    CHECK(h.flagged(0, x, 0, 0));
  }
}

TEST_CASE("property: shift and scale shift commute on interior entries") {
  Rng rng(99);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto f = gen::random_fragment(rng);
    const int dx = static_cast<int>(rng.below(5)) - 2;
    const int dy = static_cast<int>(rng.below(5)) - 2;
    const int ds = static_cast<int>(rng.below(3)) - 1;
    const auto a = shift_fragment(scale_shift_fragment(f, ds), dx, dy);
    const auto b = scale_shift_fragment(shift_fragment(f, dx, dy), ds);
    for (std::size_t i = 0; i < a.data.size(); ++i)
      if (!a.data.flags[i] && !b.data.flags[i] && !same_entry(a, b, i)) {
        ++failures;
        break;
      }
  }
  CHECK(failures == 0);
}

TEST_CASE("container round trip") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto f = gen::random_fragment(rng);
    f.spec_hash = "0123456789abcdef";
    f.bank_hash = "fedcba9876543210";
    f.fixation_x = 12.5_arcsec;
    f.fixation_y = -3.0_arcsec;
    std::optional<StageAnnotation> in;
    if (trial % 2) in = StageAnnotation{3, {160.0, 320.0}};
    const std::string bytes = serialize_fragment(f, in);
    CHECK(bytes.substr(0, 8) == "PYRAFOVE");
    std::optional<StageAnnotation> out;
    const auto g = deserialize_fragment(bytes, &out);
    REQUIRE(g.data.same_shape(f.data));
    for (std::size_t i = 0; i < f.data.size(); ++i) {
      CHECK(g.data.values[i] == static_cast<double>(static_cast<float>(f.data.values[i])));
      CHECK(g.data.flags[i] == f.data.flags[i]);
    }
    CHECK(g.n_x == f.n_x);
    CHECK(g.two_d == f.two_d);
    CHECK(g.spec_hash == f.spec_hash);
    CHECK(g.bank_hash == f.bank_hash);
    CHECK(g.fixation_x.arcsec() == 12.5);
    CHECK(g.band_radii_arcsec == f.band_radii_arcsec);
    CHECK(out.has_value() == in.has_value());
    if (in) {
      CHECK(out->stage == 3);
      CHECK(out->spacing_arcsec == in->spacing_arcsec);
    }
    CHECK(serialize_fragment(g, out) == bytes);
  }
}

TEST_CASE("corrupted containers are I/O errors") {
  Rng rng(6);
  const auto bytes = serialize_fragment(gen::random_fragment(rng));
  CHECK_THROWS_AS(deserialize_fragment(bytes.substr(0, bytes.size() - 1)), IoError);
  CHECK_THROWS_AS(deserialize_fragment(bytes + "x"), IoError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'Q';
  CHECK_THROWS_AS(deserialize_fragment(bad_magic), IoError);
  std::string bad_header = bytes;
  bad_header[12] = '!';
  CHECK_THROWS_AS(deserialize_fragment(bad_header), IoError);
  CHECK_THROWS_AS(deserialize_fragment("PYRA"), IoError);
  CHECK_THROWS_AS(read_fragment("/nonexistent/dir/x.pfrag"), IoError);
}

TEST_CASE("file round trip and csv") {
  Rng rng(7);
  const auto f = gen::random_fragment(rng);
  const auto path = std::filesystem::temp_directory_path() / "pyrafove_test_fragment.pfrag";
  write_fragment(f, path.string());
  const auto g = read_fragment(path.string());
  CHECK(serialize_fragment(g) == serialize_fragment(f));
  std::filesystem::remove(path);
  const std::string csv = fragment_csv(f);
  CHECK(csv.rfind("i_s,i_x,i_y,theta,value,flag\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == f.data.size() + 1);
}

TEST_CASE("extract shape and metadata") {
  const auto spec = make_lattice_spec(marr_default_bands(), 0.05);
  const auto bank = make_bank(spec, 4, GaborParams{}, 360.0);
  RetinalImage img;
  img.pixels = Image(401, 41, 0.0);
  draw_letter(img.pixels, 'E', 20.0, 200.0, 20.0);
  img.pixels_per_degree = 360.0;
  const auto f = extract(img, spec, bank);
  CHECK(f.data.n_s == 5);
  CHECK(f.data.width == 41);
  CHECK(f.data.height == 1);
  CHECK(f.data.channels == 4);
  CHECK(f.spec_hash == spec.hash());
  CHECK(f.bank_hash == bank.hash());
  for (double v : f.data.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-12);
  }
  // Letter at fixation: band 0 center responds, far band-0 samples see nothing.
  double center = 0;
  for (int c = 0; c < 4; ++c) center = std::max(center, f.at(0, 0, 0, c));
  CHECK(center > 0.1);
  CHECK(f.at(0, 15, 0, 0) == 0.0);

  ExtractOptions only;
  only.bands = {1};
  const auto g = extract(img, spec, bank, only);
  CHECK(g.at(1, 0, 0, 2) == f.at(1, 0, 0, 2));
  CHECK(g.at(0, 0, 0, 0) == 0.0);
  CHECK(g.flagged(0, 0, 0, 0));

  auto other = make_lattice_spec(geometric_bands(40.0_arcsec, 640.0_arcsec, 2.0), 0.05);
  CHECK_THROWS(extract(img, other, bank));
}

TEST_CASE("threaded extraction is identical") {
  const auto spec = make_lattice_spec(marr_default_bands(), 0.05, Dimensionality::TwoD);
  const auto bank = make_bank(spec, 4, GaborParams{}, 360.0, 0.02);
  RetinalImage img;
  img.pixels = Image(201, 201, 0.5);
  draw_letter(img.pixels, 'H', 30.0, 110.0, 90.0);
  img.pixels_per_degree = 360.0;
  ExtractOptions one, four;
  four.threads = 4;
  CHECK(serialize_fragment(extract(img, spec, bank, one)) == serialize_fragment(extract(img, spec, bank, four)));
}
