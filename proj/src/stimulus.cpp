#include "pyrafove/stimulus.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include "pyrafove/errors.hpp"
#include "pyrafove/templates.hpp"

namespace pyrafove {

namespace {

struct Glyph {
  char name;
  std::array<const char*, 5> rows;
};

// Sloan-style letters on a 5 x 5 grid, stroke width one cell.
constexpr Glyph kGlyphs[] = {
    {'C', {".####", "#....", "#....", "#....", ".####"}},
    {'D', {"####.", "#...#", "#...#", "#...#", "####."}},
    {'E', {"#####", "#....", "####.", "#....", "#####"}},
    {'H', {"#...#", "#...#", "#####", "#...#", "#...#"}},
    {'K', {"#...#", "#..#.", "###..", "#..#.", "#...#"}},
    {'N', {"#...#", "##..#", "#.#.#", "#..##", "#...#"}},
    {'O', {".###.", "#...#", "#...#", "#...#", ".###."}},
    {'R', {"####.", "#...#", "####.", "#..#.", "#...#"}},
    {'S', {".####", "#....", ".###.", "....#", "####."}},
    {'V', {"#...#", "#...#", "#...#", ".#.#.", "..#.."}},
    {'Z', {"#####", "...#.", "..#..", ".#...", "#####"}},
};

const Glyph& find_glyph(char c) {
  for (const auto& g : kGlyphs)
    if (g.name == c) return g;
  throw ParameterError(std::string("no glyph for letter '") + c + "'");
}

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

int fft_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

const std::string& sloan_letters() {
  static const std::string letters = [] {
    std::string s;
    for (const auto& g : kGlyphs) s.push_back(g.name);
    return s;
  }();
  return letters;
}

bool has_glyph(char glyph) { return sloan_letters().find(glyph) != std::string::npos; }

void draw_letter(Image& canvas, char glyph, double size_px, double cx, double cy) {
  const Glyph& g = find_glyph(glyph);
  const double cell = size_px / 5.0;
  const double left = cx - 0.5 * size_px;
  const double top = cy - 0.5 * size_px;
  const int px0 = std::max(0, static_cast<int>(std::floor(left - 0.5)));
  const int px1 = std::min(canvas.width - 1, static_cast<int>(std::ceil(left + size_px + 0.5)));
  const int py0 = std::max(0, static_cast<int>(std::floor(top - 0.5)));
  const int py1 = std::min(canvas.height - 1, static_cast<int>(std::ceil(top + size_px + 0.5)));
  for (int py = py0; py <= py1; ++py) {
    for (int px = px0; px <= px1; ++px) {
      double cover = 0.0;
      for (int r = 0; r < 5; ++r) {
        const double oy = overlap(py - 0.5, py + 0.5, top + r * cell, top + (r + 1) * cell);
        if (oy <= 0.0) continue;
        for (int c = 0; c < 5; ++c) {
          if (g.rows[r][c] != '#') continue;
          cover += oy * overlap(px - 0.5, px + 0.5, left + c * cell, left + (c + 1) * cell);
        }
      }
      if (cover > 0.0) canvas.at(px, py) = std::min(1.0, canvas.at(px, py) + cover);
    }
  }
}

Stimulus render_letter(char glyph, AngularLength size, double pixels_per_degree) {
  find_glyph(glyph);
  if (!(pixels_per_degree > 0.0)) throw ParameterError("pixels_per_degree must be positive");
  const double size_px = size.pixels(pixels_per_degree);
  if (size_px < kMinLetterPixels - 1e-9) {
    std::ostringstream msg;
    msg << "letter of " << size_px << " px is below the " << kMinLetterPixels << " px raster floor";
    throw ParameterError(msg.str());
  }
  int n = static_cast<int>(std::ceil(size_px - 1e-9)) + 2;
  if (n % 2 == 0) ++n;
  Stimulus st;
  st.pixels = Image(n, n, 0.0);
  draw_letter(st.pixels, glyph, size_px, 0.5 * (n - 1), 0.5 * (n - 1));
  st.glyph = glyph;
  st.size = size;
  st.pixels_per_degree = pixels_per_degree;
  return st;
}

Image make_grating(int width, int height, double period_px, double theta, double phase,
                   double contrast) {
  Image img(width, height);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      img.at(x, y) = 0.5 + 0.5 * contrast *
                               std::cos(2.0 * std::numbers::pi * (x * c - y * s) / period_px + phase);
  return img;
}

double band_gain(double rho, double rho_k) {
  if (rho <= 0.0) return 0.0;
  const double d = std::fabs(std::log2(rho / rho_k));
  if (d <= 0.5) return 1.0;
  if (d >= 0.75) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (d - 0.5) / 0.25));
}

Image bandpass_linear(const Image& img, AngularLength s, double pixels_per_degree,
                      double wavelength_ratio, bool periodic) {
  const double lambda_px = wavelength_ratio * s.pixels(pixels_per_degree);
  if (lambda_px < 2.0 - 1e-9) {
    const double min_ppd = nyquist_pixels_per_degree(s, wavelength_ratio);
    std::ostringstream msg;
    msg << "band s = " << s.arcsec() << "\" is below Nyquist at " << pixels_per_degree
        << " px/deg; needs at least " << min_ppd;
    throw ResolutionError(msg.str(), min_ppd);
  }
  const int margin = periodic ? 0 : static_cast<int>(std::ceil(4.0 * lambda_px));
  const int nx = periodic ? img.width : fft_size(img.width + 2 * margin);
  const int ny = periodic ? img.height : fft_size(img.height + 2 * margin);
  const int nxc = nx / 2 + 1;

  double* real = fftw_alloc_real(static_cast<std::size_t>(nx) * ny);
  fftw_complex* spec = fftw_alloc_complex(static_cast<std::size_t>(nxc) * ny);
  fftw_plan fwd, inv;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fwd = fftw_plan_dft_r2c_2d(ny, nx, real, spec, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_2d(ny, nx, spec, real, FFTW_ESTIMATE);
  }
  std::fill(real, real + static_cast<std::size_t>(nx) * ny, 0.0);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      real[static_cast<std::size_t>(y + margin) * nx + (x + margin)] = img.at(x, y);
  fftw_execute(fwd);
  const double rho_k = 1.0 / lambda_px;
  const double norm = 1.0 / (static_cast<double>(nx) * ny);
  for (int ky = 0; ky < ny; ++ky) {
    const double fy = (ky <= ny / 2 ? ky : ky - ny) / static_cast<double>(ny);
    for (int kx = 0; kx < nxc; ++kx) {
      const double fx = kx / static_cast<double>(nx);
      const double g = band_gain(std::hypot(fx, fy), rho_k) * norm;
      fftw_complex& z = spec[static_cast<std::size_t>(ky) * nxc + kx];
      z[0] *= g;
      z[1] *= g;
    }
  }
  fftw_execute(inv);
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(x, y) = real[static_cast<std::size_t>(y + margin) * nx + (x + margin)];
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }
  fftw_free(real);
  fftw_free(spec);
  return out;
}

Stimulus bandpass_stimulus(const Stimulus& stim, const ScaleBand& band, double wavelength_ratio) {
  const double ppd = stim.pixels_per_degree;
  const double lambda_px = wavelength_ratio * band.radius.pixels(ppd);
  const int m = static_cast<int>(std::ceil(3.0 * lambda_px));
  Image padded(stim.pixels.width + 2 * m, stim.pixels.height + 2 * m, stim.background);
  for (int y = 0; y < stim.pixels.height; ++y)
    for (int x = 0; x < stim.pixels.width; ++x) padded.at(x + m, y + m) = stim.pixels.at(x, y);
  for (double& v : padded.data) v -= stim.background;
  Image f = bandpass_linear(padded, band.radius, ppd, wavelength_ratio);
  double peak = 0.0;
  for (double v : f.data) peak = std::max(peak, std::fabs(v));
  Stimulus out = stim;
  out.band = band.index;
  out.background = 0.5;
  out.pixels = Image(f.width, f.height, 0.5);
  if (peak > 0.0)
    for (std::size_t i = 0; i < f.data.size(); ++i) out.pixels.data[i] = 0.5 + 0.5 * f.data[i] / peak;
  return out;
}

void add_noise(Image& img, int x0, int y0, int x1, int y1, double sigma, Rng& rng) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, img.width - 1);
  y1 = std::min(y1, img.height - 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      img.at(x, y) = std::clamp(img.at(x, y) + sigma * rng.normal(), 0.0, 1.0);
}

void paste(Image& canvas, const Image& patch, int cx, int cy) {
  const int ox = cx - (patch.width - 1) / 2;
  const int oy = cy - (patch.height - 1) / 2;
  for (int y = 0; y < patch.height; ++y)
    for (int x = 0; x < patch.width; ++x)
      if (canvas.contains(ox + x, oy + y)) canvas.at(ox + x, oy + y) = patch.at(x, y);
}

}  // namespace pyrafove
