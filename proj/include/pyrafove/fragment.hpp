#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pyrafove/geometry.hpp"
#include "pyrafove/image.hpp"
#include "pyrafove/templates.hpp"

namespace pyrafove {

/// Dense (band, x, y, channel) tensor with a boundary flag per entry.
/// Channel is the fastest axis, then y, then x, then band.
struct LatticeTensor {
  int n_s = 0;
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> flags;

  LatticeTensor() = default;
  LatticeTensor(int n_s, int width, int height, int channels);

  std::size_t size() const { return values.size(); }
  std::size_t index(int s, int x, int y, int c) const {
    return ((static_cast<std::size_t>(s) * width + x) * height + y) * channels + c;
  }
  double& at(int s, int x, int y, int c) { return values[index(s, x, y, c)]; }
  double at(int s, int x, int y, int c) const { return values[index(s, x, y, c)]; }
  bool same_shape(const LatticeTensor& o) const {
    return n_s == o.n_s && width == o.width && height == o.height && channels == o.channels;
  }
};

/// Activations of every template over the lattice for one fixation.
/// Positions are stored 0-based: column c holds i_x = c - n_x.
struct IPFragment {
  LatticeTensor data;
  int n_x = 0;
  bool two_d = false;
  std::string spec_hash;
  std::string bank_hash;
  AngularLength fixation_x;
  AngularLength fixation_y;
  double pixels_per_degree = 0.0;
  std::vector<double> band_radii_arcsec;

  double at(int i_s, int i_x, int i_y, int theta) const {
    return data.at(i_s, i_x + n_x, two_d ? i_y + n_x : 0, theta);
  }
  bool flagged(int i_s, int i_x, int i_y, int theta) const {
    return data.flags[data.index(i_s, i_x + n_x, two_d ? i_y + n_x : 0, theta)] != 0;
  }
};

struct ExtractOptions {
  /// Skip the kernel for patches over constant pixels (exactly 0 either way).
  bool fast = true;
  /// Restrict to these ladder bands; others stay zero and flagged. Empty = all.
  std::vector<int> bands;
  int threads = 1;
};

IPFragment extract(const RetinalImage& image, const LatticeSpec& spec, const TemplateBank& bank,
                   const ExtractOptions& options = {});

/// Default per-band weights 2^-i, normalized to sum 1.
std::vector<double> default_band_weights(int n_s);

/// Band-weighted cosine in [-1, 1]; 0 when either side has zero norm.
double fragment_similarity(const IPFragment& a, const IPFragment& b,
                           const std::vector<double>& weights);
double fragment_similarity(const IPFragment& a, const IPFragment& b);

/// Moves entries by (di_x, di_y) lattice steps; vacated entries are zero and flagged.
IPFragment shift_fragment(const IPFragment& f, int di_x, int di_y = 0);
/// Moves entries by di_s bands; vacated bands are zero and flagged.
IPFragment scale_shift_fragment(const IPFragment& f, int di_s);

/// Optional stage annotation for hierarchy arrays stored in the same container.
struct StageAnnotation {
  int stage = 1;
  std::vector<double> spacing_arcsec;
};

/// Binary container: "PYRAFOVE", u32 LE header length, JSON header, f32 LE
/// payload in (i_s, i_x, i_y, theta) order, LSB-first bit-packed flags.
std::string serialize_fragment(const IPFragment& f,
                               const std::optional<StageAnnotation>& stage = std::nullopt);
IPFragment deserialize_fragment(const std::string& bytes,
                                std::optional<StageAnnotation>* stage = nullptr);
void write_fragment(const IPFragment& f, const std::string& path,
                    const std::optional<StageAnnotation>& stage = std::nullopt);
IPFragment read_fragment(const std::string& path, std::optional<StageAnnotation>* stage = nullptr);

/// Columns i_s,i_x,i_y,theta,value,flag.
std::string fragment_csv(const IPFragment& f);

}  // namespace pyrafove
