#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pyrafove/angle.hpp"

namespace pyrafove {

/// Row-major grayscale raster. Pixel (x, y) has its center at integer
/// coordinates; x grows to the right, y grows downward.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, double fill = 0.0);

  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  /// Pixel value, 0 outside the raster.
  double get(int x, int y) const { return contains(x, y) ? at(x, y) : 0.0; }
};

/// Bilinear sample with zero padding. `outside` is set when any contributing
/// neighbour lies off the raster.
double sample_bilinear(const Image& img, double x, double y, bool* outside = nullptr);
/// Catmull-Rom bicubic sample with zero padding.
double sample_bicubic(const Image& img, double x, double y);

void clamp01(Image& img);

/// Magnifies the content by `factor` about pixel (cx, cy); output has the
/// input's size. Bicubic, clamped to [0, 1].
Image scale_image(const Image& img, double factor, double cx, double cy);
/// Rotates the content by `radians` (counter-clockwise on screen) about (cx, cy).
Image rotate_image(const Image& img, double radians, double cx, double cy);
/// Moves the content by (dx, dy) pixels.
Image translate_image(const Image& img, double dx, double dy);

/// Image seen at a fixation. `fixation_*` is the fixated point relative to
/// the raster center, in visual angle (x right, y down).
struct RetinalImage {
  Image pixels;
  double pixels_per_degree = 0.0;
  AngularLength fixation_x;
  AngularLength fixation_y;

  /// Throws ParameterError unless ppd > 0 and the fixation lies on the raster.
  void validate() const;

  /// Pixel coordinates of retinal position (x, y), measured from fixation.
  double to_px_x(AngularLength x) const;
  double to_px_y(AngularLength y) const;
  double center_px_x() const { return 0.5 * (pixels.width - 1); }
  double center_px_y() const { return 0.5 * (pixels.height - 1); }
};

/// PGM (P2/P5, 8 or 16 bit) or PNG, detected from the leading bytes.
/// Values are scaled to [0, 1]. Throws IoError on failure.
Image read_image(const std::string& path);
Image read_pgm(const std::string& path);
Image read_png(const std::string& path);
/// 16-bit binary PGM.
void write_pgm(const Image& img, const std::string& path);

}  // namespace pyrafove
