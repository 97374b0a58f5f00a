#pragma once

#include <stdexcept>
#include <string>

namespace pyrafove {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid numeric parameter (non-positive slope, empty band range, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent configuration (unknown keys, spec/bank mismatch).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File system or decoding failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Numeric failure: sub-Nyquist kernels, degenerate sweeps.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ResolutionError : public NumericError {
 public:
  ResolutionError(const std::string& what, double min_pixels_per_degree)
      : NumericError(what), min_pixels_per_degree_(min_pixels_per_degree) {}

  double min_pixels_per_degree() const noexcept { return min_pixels_per_degree_; }

 private:
  double min_pixels_per_degree_;
};

class BandLookupError : public Error {
 public:
  using Error::Error;
};

class OutOfRegionError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes that do not agree (fragment comparison, gallery entries).
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace pyrafove
