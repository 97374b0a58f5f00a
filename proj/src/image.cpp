#include "pyrafove/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pyrafove/errors.hpp"

namespace pyrafove {

Image::Image(int w, int h, double fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

double sample_bilinear(const Image& img, double x, double y, bool* outside) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const double tx = x - fx;
  const double ty = y - fy;
  double acc = 0.0;
  const int xs[2] = {x0, x0 + 1};
  const int ys[2] = {y0, y0 + 1};
  const double wx[2] = {1.0 - tx, tx};
  const double wy[2] = {1.0 - ty, ty};
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      const double w = wx[i] * wy[j];
      if (w == 0.0) continue;
      if (img.contains(xs[i], ys[j])) {
        acc += w * img.at(xs[i], ys[j]);
      } else if (outside) {
        *outside = true;
      }
    }
  }
  return acc;
}

namespace {

// Catmull-Rom weights for offsets -1, 0, 1, 2.
void cubic_weights(double t, double w[4]) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
  w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
  w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
  w[3] = 0.5 * (t3 - t2);
}

}  // namespace

double sample_bicubic(const Image& img, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  double wx[4], wy[4];
  cubic_weights(x - fx, wx);
  cubic_weights(y - fy, wy);
  double acc = 0.0;
  for (int j = 0; j < 4; ++j) {
    double row = 0.0;
    for (int i = 0; i < 4; ++i) row += wx[i] * img.get(x0 - 1 + i, y0 - 1 + j);
    acc += wy[j] * row;
  }
  return acc;
}

void clamp01(Image& img) {
  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
}

Image scale_image(const Image& img, double factor, double cx, double cy) {
  if (!(factor > 0.0)) throw ParameterError("scale factor must be positive");
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(x, y) = sample_bicubic(img, cx + (x - cx) / factor, cy + (y - cy) / factor);
  clamp01(out);
  return out;
}

Image rotate_image(const Image& img, double radians, double cx, double cy) {
  Image out(img.width, img.height);
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      // Screen y points down, so a counter-clockwise turn on screen is
      // clockwise in (x, y); invert it to find the source pixel.
      const double dx = x - cx;
      const double dy = y - cy;
      out.at(x, y) = sample_bicubic(img, cx + c * dx - s * dy, cy + s * dx + c * dy);
    }
  }
  clamp01(out);
  return out;
}

Image translate_image(const Image& img, double dx, double dy) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out.at(x, y) = sample_bicubic(img, x - dx, y - dy);
  clamp01(out);
  return out;
}

void RetinalImage::validate() const {
  if (!(pixels_per_degree > 0.0)) throw ParameterError("pixels_per_degree must be positive");
  if (pixels.width <= 0 || pixels.height <= 0) throw ParameterError("empty image");
  const double fx = center_px_x() + fixation_x.pixels(pixels_per_degree);
  const double fy = center_px_y() + fixation_y.pixels(pixels_per_degree);
  if (fx < -0.5 || fy < -0.5 || fx > pixels.width - 0.5 || fy > pixels.height - 0.5)
    throw ParameterError("fixation lies outside the image");
}

double RetinalImage::to_px_x(AngularLength x) const {
  return center_px_x() + (fixation_x + x).pixels(pixels_per_degree);
}

double RetinalImage::to_px_y(AngularLength y) const {
  return center_px_y() + (fixation_y + y).pixels(pixels_per_degree);
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Image read_pgm(const std::string& path) {
  const std::string bytes = slurp(path);
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_ws();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
      throw IoError("malformed PGM header in " + path);
    long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1L << 30) throw IoError("PGM header value too large in " + path);
      ++pos;
    }
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5'))
    throw IoError(path + " is not a grayscale PGM");
  const bool ascii = bytes[1] == '2';
  pos = 2;
  const long w = read_int();
  const long h = read_int();
  const long maxval = read_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535 || w * h > (1L << 28))
    throw IoError("unsupported PGM dimensions in " + path);
  Image img(static_cast<int>(w), static_cast<int>(h));
  const std::size_t n = img.data.size();
  if (ascii) {
    for (std::size_t i = 0; i < n; ++i) {
      const long v = read_int();
      if (v > maxval) throw IoError("PGM sample exceeds maxval in " + path);
      img.data[i] = static_cast<double>(v) / maxval;
    }
    return img;
  }
  ++pos;  // single whitespace after maxval
  const std::size_t bps = maxval > 255 ? 2 : 1;
  if (bytes.size() < pos + n * bps) throw IoError("truncated PGM payload in " + path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bps == 2 ? (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1] : p[i];
    if (v > static_cast<unsigned>(maxval)) throw IoError("PGM sample exceeds maxval in " + path);
    img.data[i] = static_cast<double>(v) / maxval;
  }
  return img;
}

Image read_png(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw IoError("cannot decode PNG " + path + ": " + png.message);
  // 16-bit files are read as linear 16-bit gray; 8-bit files keep their
  // stored values (no gamma conversion).
  const bool wide = (png.format & PNG_FORMAT_FLAG_LINEAR) != 0;
  png.format = wide ? PNG_FORMAT_LINEAR_Y : PNG_FORMAT_GRAY;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&png);
    throw IoError("cannot decode PNG " + path + ": " + png.message);
  }
  Image img(static_cast<int>(png.width), static_cast<int>(png.height));
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    if (wide) {
      png_uint_16 v;
      std::memcpy(&v, buf.data() + 2 * i, sizeof v);
      img.data[i] = v / 65535.0;
    } else {
      img.data[i] = buf[i] / 255.0;
    }
  }
  return img;
}

Image read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char head[8] = {};
  in.read(head, sizeof head);
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (in.gcount() == 8 && std::memcmp(head, png_sig, 8) == 0) return read_png(path);
  if (in.gcount() >= 2 && head[0] == 'P' && (head[1] == '2' || head[1] == '5')) return read_pgm(path);
  throw IoError(path + ": unrecognized image format (expected PGM or PNG)");
}

void write_pgm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  std::vector<unsigned char> buf(img.data.size() * 2);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const auto v = static_cast<unsigned>(std::lround(std::clamp(img.data[i], 0.0, 1.0) * 65535.0));
    buf[2 * i] = static_cast<unsigned char>(v >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace pyrafove
