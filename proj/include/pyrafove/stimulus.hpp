#pragma once

#include <optional>
#include <string>

#include "pyrafove/angle.hpp"
#include "pyrafove/geometry.hpp"
#include "pyrafove/image.hpp"
#include "pyrafove/rng.hpp"

namespace pyrafove {

struct Stimulus {
  Image pixels;
  char glyph = 0;
  AngularLength size;
  AngularLength eccentricity;
  std::optional<int> band;
  double pixels_per_degree = 0.0;
  /// Value of the surround the patch is meant to be pasted on.
  double background = 0.0;
};

/// Letters available in the embedded 5x5 stroke font.
const std::string& sloan_letters();
bool has_glyph(char glyph);

/// Smallest rendered letter height in pixels.
constexpr double kMinLetterPixels = 5.0;

/// Anti-aliased glyph (ink 1 on 0) of height and width `size`, centered in a
/// square patch of ceil(size_px) + 2 pixels.
Stimulus render_letter(char glyph, AngularLength size, double pixels_per_degree);

/// Adds glyph coverage (exact pixel-area overlap) centered at pixel (cx, cy),
/// saturating at 1.
void draw_letter(Image& canvas, char glyph, double size_px, double cx, double cy);

/// Sinusoid 0.5 + 0.5 * contrast * cos(2 pi (x cos t - y sin t) / period + phase).
Image make_grating(int width, int height, double period_px, double theta, double phase,
                   double contrast = 1.0);

/// Radial passband of band radius s: unity within half an octave of 1/lambda,
/// raised-cosine roll-off to zero at 0.75 octave.
double band_gain(double cycles_per_pixel, double center_cycles_per_pixel);

/// Signed band-passed copy (same size). With `periodic` the raster is treated
/// as one period; otherwise it is zero-padded before filtering.
Image bandpass_linear(const Image& img, AngularLength s, double pixels_per_degree,
                      double wavelength_ratio = 1.0, bool periodic = false);

/// Band-passed stimulus on a 0.5 surround, scaled into [0, 1]. The patch grows
/// by three wavelengths on every side to hold the ringing.
Stimulus bandpass_stimulus(const Stimulus& stim, const ScaleBand& band,
                           double wavelength_ratio = 1.0);

/// Adds N(0, sigma^2) noise to the pixels of one rectangle and clips to [0, 1].
void add_noise(Image& img, int x0, int y0, int x1, int y1, double sigma, Rng& rng);

/// Copies `patch` into `canvas` with its center at integer pixel (cx, cy).
void paste(Image& canvas, const Image& patch, int cx, int cy);

}  // namespace pyrafove
