#pragma once

#include <string>
#include <vector>

#include "pyrafove/angle.hpp"
#include "pyrafove/geometry.hpp"
#include "pyrafove/image.hpp"

namespace pyrafove {

struct GaborParams {
  AngularLength s;  // envelope radius, also the support radius
  /// Direction of the carrier wave vector, counter-clockwise on screen.
  double theta = 0.0;
  double wavelength_ratio = 1.0;  // lambda = wavelength_ratio * s
  double sigma_ratio = 0.5;       // sigma = sigma_ratio * s
};

/// Quadrature kernel pair on the pixel offsets inside the circular support
/// u^2 + v^2 <= s_px^2. Both phases are zero-mean with unit L2 norm.
struct FilterKernel {
  GaborParams params;
  double pixels_per_degree = 0.0;
  double s_px = 0.0;
  int radius_px = 0;  // offsets span [-radius_px, radius_px]
  std::vector<int> du;
  std::vector<int> dv;
  std::vector<double> even;
  std::vector<double> odd;

  std::size_t size() const { return even.size(); }
  double arcsec_per_pixel() const { return 3600.0 / pixels_per_degree; }
  /// Dense (2r+1)^2 grid of one phase, zero outside the support.
  std::vector<double> dense(bool odd_phase) const;
};

/// Throws ResolutionError when lambda is below two pixels.
FilterKernel make_gabor(const GaborParams& params, double pixels_per_degree);

/// Minimal pixels/degree at which band radius s passes the Nyquist check.
double nyquist_pixels_per_degree(AngularLength s, double wavelength_ratio);

struct TemplateBank {
  std::vector<ScaleBand> bands;  // the lattice ladder the bank was built for
  int n_theta = 0;
  GaborParams defaults;
  double pixels_per_degree = 0.0;
  /// Patch RMS contrast below which responses are attenuated instead of
  /// amplified; 0 keeps pure contrast normalization.
  double contrast_floor = 0.0;
  std::vector<FilterKernel> kernels;  // [band * n_theta + orientation]

  const FilterKernel& kernel(int band, int orientation) const {
    return kernels[static_cast<std::size_t>(band) * n_theta + orientation];
  }
  double orientation(int j) const;
  std::string to_json() const;
  std::string hash() const;
};

TemplateBank make_bank(const LatticeSpec& spec, int n_theta, const GaborParams& defaults,
                       double pixels_per_degree, double contrast_floor = 0.0);

/// One kernel-pair evaluation.
struct Response {
  double even = 0.0;
  double odd = 0.0;
  double energy = 0.0;
  bool padded = false;
};

/// Evaluates all orientations of a band at lattice points of one image.
/// The fast mode answers exactly 0 for patches over constant pixels without
/// touching the kernel; brute mode always runs the full dot products.
class ResponseEvaluator {
 public:
  ResponseEvaluator(const RetinalImage& image, const TemplateBank& bank, bool fast = true);

  /// Writes bank.n_theta responses into `out`.
  void evaluate(const SamplePoint& point, Response* out) const;
  /// Same, at an explicit pixel center.
  void evaluate_at(double cx, double cy, int band, Response* out) const;

 private:
  bool constant_box(int x0, int y0, int x1, int y1) const;

  const RetinalImage& image_;
  const TemplateBank& bank_;
  bool fast_;
  int pw_ = 0;  // padded width (image + 1 px zero ring)
  int ph_ = 0;
  std::vector<int> h_diff_;  // summed-area table of horizontal neighbour changes
  std::vector<int> v_diff_;
};

Response respond_detail(const RetinalImage& image, const SamplePoint& point,
                        const TemplateBank& bank, int orientation);
/// Quadrature energy in [0, 1].
double respond(const RetinalImage& image, const SamplePoint& point, const TemplateBank& bank,
               int orientation);

/// CSV grid of one kernel phase.
std::string kernel_csv(const FilterKernel& k, bool odd_phase);

}  // namespace pyrafove
