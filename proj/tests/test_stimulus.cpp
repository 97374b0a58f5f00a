#include <cmath>

#include "doctest.h"
#include "pyrafove/errors.hpp"
#include "pyrafove/image.hpp"
#include "pyrafove/stimulus.hpp"

using namespace pyrafove;
using namespace pyrafove::literals;

namespace {

double rms(const Image& img) {
  double q = 0;
  for (double v : img.data) q += v * v;
  return std::sqrt(q / img.data.size());
}

}  // namespace

TEST_CASE("alphabet") {
  CHECK(sloan_letters().size() >= 10);
  for (char c : sloan_letters()) CHECK(has_glyph(c));
  CHECK_FALSE(has_glyph('#'));
}

TEST_CASE("letter height matches the requested size") {
  // 'E' has a full-height stem: one fully inked pixel per covered row.
  for (double size_px : {5.0, 12.0, 20.0, 33.5}) {
    const auto st = render_letter('E', AngularLength::from_arcsec(size_px * 10.0), 360.0);
    const Image& img = st.pixels;
    CHECK(img.width == img.height);
    CHECK(img.width % 2 == 1);
    double height = 0;
    for (int y = 0; y < img.height; ++y) {
      double row = 0;
      for (int x = 0; x < img.width; ++x) row = std::max(row, img.at(x, y));
      height += row;
    }
    CHECK(height == doctest::Approx(size_px).epsilon(0.05));
  }
  CHECK_THROWS_AS(render_letter('E', 40.0_arcsec, 360.0), ParameterError);  // 4 px
}

TEST_CASE("draw_letter saturates at 1") {
  Image img(41, 41, 0.0);
  draw_letter(img, 'O', 20.0, 20.0, 20.0);
  draw_letter(img, 'O', 20.0, 20.0, 20.0);
  for (double v : img.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("band gain shape") {
  CHECK(band_gain(0.1, 0.1) == doctest::Approx(1.0));
  CHECK(band_gain(0.1 * std::pow(2.0, 0.45), 0.1) == doctest::Approx(1.0));
  CHECK(band_gain(0.1 * std::pow(2.0, 0.8), 0.1) == 0.0);
  CHECK(band_gain(0.1 / std::pow(2.0, 0.8), 0.1) == 0.0);
  const double mid = band_gain(0.1 * std::pow(2.0, 0.625), 0.1);
  CHECK(mid > 0.0);
  CHECK(mid < 1.0);
  CHECK(band_gain(0.0, 0.1) == 0.0);
}

TEST_CASE("band-pass keeps its band, removes others, and is idempotent there") {
  // s = 80" at 360 px/deg: wavelength 8 px.
  const Image in_band = make_grating(128, 128, 8.0, 0.0, 0.3);
  const Image out_band = make_grating(128, 128, 32.0, 0.0, 0.3);
  const auto kept = bandpass_linear(in_band, 80.0_arcsec, 360.0, 1.0, true);
  const auto gone = bandpass_linear(out_band, 80.0_arcsec, 360.0, 1.0, true);
  Image ac = in_band;
  for (auto& v : ac.data) v -= 0.5;
  CHECK(rms(kept) == doctest::Approx(rms(ac)).epsilon(1e-6));
  double diff = 0;
  for (std::size_t i = 0; i < ac.data.size(); ++i) diff = std::max(diff, std::fabs(kept.data[i] - ac.data[i]));
  CHECK(diff < 1e-9);
  CHECK(rms(gone) < 1e-9);
  const auto twice = bandpass_linear(kept, 80.0_arcsec, 360.0, 1.0, true);
  for (std::size_t i = 0; i < kept.data.size(); ++i) CHECK(twice.data[i] == doctest::Approx(kept.data[i]).epsilon(1e-9));
  const auto flat = bandpass_linear(Image(64, 64, 0.7), 80.0_arcsec, 360.0, 1.0, true);
  CHECK(rms(flat) < 1e-12);
}

TEST_CASE("band-passed stimulus sits on a mid-gray surround") {
  const auto st = render_letter('H', 400.0_arcsec, 360.0);
  const auto bp = bandpass_stimulus(st, ScaleBand{2, 80.0_arcsec});
  CHECK(bp.background == doctest::Approx(0.5));
  CHECK(bp.band == 2);
  CHECK(bp.pixels.width > st.pixels.width);
  double lo = 1, hi = 0;
  for (double v : bp.pixels.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= 0.0);
  CHECK(hi <= 1.0);
  CHECK(hi - lo > 0.5);
}

TEST_CASE("noise stays inside its box and is seeded") {
  Image a(50, 50, 0.5), b(50, 50, 0.5);
  Rng ra(9), rb(9);
  add_noise(a, 10, 10, 20, 20, 0.1, ra);
  add_noise(b, 10, 10, 20, 20, 0.1, rb);
  CHECK(a.data == b.data);
  CHECK(a.at(0, 0) == 0.5);
  CHECK(a.at(30, 30) == 0.5);
  int changed = 0;
  for (int y = 10; y < 20; ++y)
    for (int x = 10; x < 20; ++x) changed += a.at(x, y) != 0.5;
  CHECK(changed > 90);
}

TEST_CASE("image transforms") {
  Image img(21, 21, 0.0);
  img.at(12, 10) = 1.0;
  const auto t = translate_image(img, 2.0, 3.0);
  CHECK(t.at(14, 13) == doctest::Approx(1.0));
  const auto s = scale_image(img, 2.0, 10.0, 10.0);
  CHECK(s.at(14, 10) == doctest::Approx(1.0));
  const auto r = rotate_image(img, std::acos(-1.0) / 2, 10.0, 10.0);
  CHECK(r.at(10, 8) == doctest::Approx(1.0));  // counter-clockwise on screen
  CHECK(sample_bilinear(img, 12.0, 10.0) == 1.0);
  bool outside = false;
  sample_bilinear(img, -0.5, 3.0, &outside);
  CHECK(outside);
}
