#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pyrafove/errors.hpp"
#include "pyrafove/fragment.hpp"
#include "pyrafove/stimulus.hpp"
#include "pyrafove/templates.hpp"

using namespace pyrafove;
using namespace pyrafove::literals;

namespace {

RetinalImage retinal(Image img, double ppd) {
  RetinalImage r;
  r.pixels = std::move(img);
  r.pixels_per_degree = ppd;
  return r;
}

SamplePoint center_point(int band, AngularLength s) {
  SamplePoint p;
  p.i_s = band;
  p.s = s;
  return p;
}

}  // namespace

TEST_CASE("nyquist limit") {
  // lambda = s at ratio 1; 2 px needs s * ppd / 3600 > 2.
  CHECK(nyquist_pixels_per_degree(40.0_arcsec, 1.0) == doctest::Approx(180.0));
  CHECK_NOTHROW(make_gabor({40.0_arcsec, 0.0, 1.0, 0.5}, 360.0));
  try {
    make_gabor({40.0_arcsec, 0.0, 1.0, 0.5}, 100.0);
    FAIL("expected ResolutionError");
  } catch (const ResolutionError& e) {
    CHECK(e.min_pixels_per_degree() == doctest::Approx(180.0));
  }
  // Exactly two pixels per wavelength: odd phase vanishes on the grid.
  CHECK_THROWS_AS(make_gabor({40.0_arcsec, 0.0, 1.0, 0.5}, 180.0), ResolutionError);
}

TEST_CASE("kernels are zero-mean with unit norm") {
  for (double theta : {0.0, 0.3, std::numbers::pi / 2, 2.5}) {
    const auto k = make_gabor({60.0_arcsec, theta, 1.0, 0.5}, 360.0);
    double me = 0, mo = 0, ne = 0, no = 0;
    for (std::size_t i = 0; i < k.size(); ++i) {
      me += k.even[i];
      mo += k.odd[i];
      ne += k.even[i] * k.even[i];
      no += k.odd[i] * k.odd[i];
      CHECK(k.du[i] * k.du[i] + k.dv[i] * k.dv[i] <= k.s_px * k.s_px + 1e-9);
    }
    CHECK(std::fabs(me) < 1e-12);
    CHECK(std::fabs(mo) < 1e-12);
    CHECK(ne == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(no == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("bank layout") {
  const auto spec = make_lattice_spec(marr_default_bands(), 0.05);
  const auto bank = make_bank(spec, 4, GaborParams{}, 360.0);
  CHECK(bank.kernels.size() == 20);
  CHECK(bank.orientation(1) == doctest::Approx(std::numbers::pi / 4));
  CHECK(bank.kernel(3, 2).params.s.arcsec() == doctest::Approx(351.0));
  CHECK(bank.hash() == make_bank(spec, 4, GaborParams{}, 360.0).hash());
  CHECK(bank.hash() != make_bank(spec, 6, GaborParams{}, 360.0).hash());
}

TEST_CASE("self-match reaches 1 and contrast inversion keeps the energy") {
  const auto spec = make_lattice_spec(marr_default_bands(), 0.05);
  const auto bank = make_bank(spec, 4, GaborParams{}, 360.0);
  const auto& k = bank.kernel(1, 1);
  Image img(61, 61, 0.5);
  for (std::size_t i = 0; i < k.size(); ++i) img.at(30 + k.du[i], 30 + k.dv[i]) = 0.5 + 0.4 * k.even[i];
  const auto r = retinal(img, 360.0);
  const auto p = center_point(1, 93.0_arcsec);
  const auto d = respond_detail(r, p, bank, 1);
  CHECK(d.even == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::fabs(d.odd) < 1e-9);
  CHECK(d.energy <= 1.0 + 1e-12);

  Image inv = img;
  for (auto& v : inv.data) v = 1.0 - v;
  const auto ri = retinal(inv, 360.0);
  for (int j = 0; j < 4; ++j) CHECK(respond(ri, p, bank, j) == doctest::Approx(respond(r, p, bank, j)));
}

TEST_CASE("quadrature energy is nearly phase invariant on a matched grating") {
  const auto spec = make_lattice_spec(marr_default_bands(), 0.05);
  const auto bank = make_bank(spec, 4, GaborParams{}, 720.0);
  const auto& k = bank.kernel(2, 0);
  const double period = k.s_px;  // lambda = s
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i < 8; ++i) {
    const double phase = 2.0 * std::numbers::pi * i / 8;
    const auto r = retinal(make_grating(201, 201, period, 0.0, phase), 720.0);
    const double e = respond(r, center_point(2, 186.0_arcsec), bank, 0);
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  CHECK(hi > 0.5);
  CHECK((hi - lo) / hi < 0.1);
}

TEST_CASE("orientation tuning follows the grating orientation") {
  const auto spec = make_lattice_spec(marr_default_bands(), 0.05);
  const auto bank = make_bank(spec, 4, GaborParams{}, 720.0);
  const double period = bank.kernel(2, 0).s_px;
  for (int j = 0; j < 4; ++j) {
    const auto r = retinal(make_grating(201, 201, period, bank.orientation(j), 0.4), 720.0);
    int best = 0;
    double best_e = -1;
    for (int o = 0; o < 4; ++o) {
      const double e = respond(r, center_point(2, 186.0_arcsec), bank, o);
      if (e > best_e) {
        best_e = e;
        best = o;
      }
    }
    CHECK(best == j);
  }
}

TEST_CASE("rotation covariance: a quarter turn moves responses two orientations") {
  const auto spec = make_lattice_spec(marr_default_bands(), 0.05);
  const auto bank = make_bank(spec, 4, GaborParams{}, 360.0);
  Image img(121, 121, 0.0);
  draw_letter(img, 'K', 40.0, 60.0, 60.0);
  const Image rot = rotate_image(img, std::numbers::pi / 2, 60.0, 60.0);
  const auto a = retinal(img, 360.0);
  const auto b = retinal(rot, 360.0);
  const auto p = center_point(2, 186.0_arcsec);
  for (int j = 0; j < 4; ++j)
    CHECK(respond(b, p, bank, (j + 2) % 4) == doctest::Approx(respond(a, p, bank, j)).epsilon(1e-6));
}

TEST_CASE("flat patches give zero and the fast path agrees with brute force") {
  const auto spec = make_lattice_spec(marr_default_bands(), 0.05, Dimensionality::TwoD);
  const auto bank = make_bank(spec, 4, GaborParams{}, 360.0, 0.02);
  Image img(301, 301, 0.3);
  draw_letter(img, 'R', 60.0, 170.0, 140.0);
  draw_letter(img, 'S', 25.0, 100.0, 200.0);
  RetinalImage r = retinal(img, 360.0);
  ExtractOptions fast, brute;
  brute.fast = false;
  const auto a = extract(r, spec, bank, fast);
  const auto b = extract(r, spec, bank, brute);
  REQUIRE(a.data.same_shape(b.data));
  double worst = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    worst = std::max(worst, std::fabs(a.data.values[i] - b.data.values[i]));
    CHECK(a.data.flags[i] == b.data.flags[i]);
  }
  CHECK(worst <= 1e-6);
  // Band 0 at the far corner sees only the flat surround.
  CHECK(a.at(0, -20, -20, 0) == 0.0);
}

TEST_CASE("kernel csv has one row per grid line") {
  const auto k = make_gabor({40.0_arcsec, 0.0, 1.0, 0.5}, 360.0);
  const std::string csv = kernel_csv(k, false);
  int lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines >= 2 * k.radius_px + 1);
}
