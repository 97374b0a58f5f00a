#pragma once

#include <compare>
#include <cmath>

namespace pyrafove {

/// Visual angle. Stored in arcseconds (1 deg = 60 arcmin = 3600 arcsec), which
/// represents every receptive-field constant used here exactly.
class AngularLength {
 public:
  constexpr AngularLength() = default;

  static constexpr AngularLength from_arcsec(double v) { return AngularLength(v); }
  static constexpr AngularLength from_arcmin(double v) { return AngularLength(v * 60.0); }
  static constexpr AngularLength from_degrees(double v) { return AngularLength(v * 3600.0); }

  constexpr double arcsec() const { return value_; }
  constexpr double arcmin() const { return value_ / 60.0; }
  constexpr double degrees() const { return value_ / 3600.0; }

  /// Length in pixels at the given sampling density.
  constexpr double pixels(double pixels_per_degree) const {
    return value_ * pixels_per_degree / 3600.0;
  }

  constexpr AngularLength operator-() const { return AngularLength(-value_); }
  constexpr AngularLength& operator+=(AngularLength o) {
    value_ += o.value_;
    return *this;
  }
  constexpr AngularLength& operator-=(AngularLength o) {
    value_ -= o.value_;
    return *this;
  }

  friend constexpr AngularLength operator+(AngularLength a, AngularLength b) {
    return AngularLength(a.value_ + b.value_);
  }
  friend constexpr AngularLength operator-(AngularLength a, AngularLength b) {
    return AngularLength(a.value_ - b.value_);
  }
  friend constexpr AngularLength operator*(AngularLength a, double k) {
    return AngularLength(a.value_ * k);
  }
  friend constexpr AngularLength operator*(double k, AngularLength a) {
    return AngularLength(a.value_ * k);
  }
  friend constexpr AngularLength operator/(AngularLength a, double k) {
    return AngularLength(a.value_ / k);
  }
  friend constexpr double operator/(AngularLength a, AngularLength b) {
    return a.value_ / b.value_;
  }
  friend constexpr auto operator<=>(AngularLength, AngularLength) = default;

 private:
  constexpr explicit AngularLength(double v) : value_(v) {}
  double value_ = 0.0;
};

inline AngularLength abs(AngularLength a) {
  return AngularLength::from_arcsec(std::fabs(a.arcsec()));
}

namespace literals {
constexpr AngularLength operator""_arcsec(long double v) {
  return AngularLength::from_arcsec(static_cast<double>(v));
}
constexpr AngularLength operator""_arcsec(unsigned long long v) {
  return AngularLength::from_arcsec(static_cast<double>(v));
}
constexpr AngularLength operator""_arcmin(long double v) {
  return AngularLength::from_arcmin(static_cast<double>(v));
}
constexpr AngularLength operator""_arcmin(unsigned long long v) {
  return AngularLength::from_arcmin(static_cast<double>(v));
}
constexpr AngularLength operator""_deg(long double v) {
  return AngularLength::from_degrees(static_cast<double>(v));
}
constexpr AngularLength operator""_deg(unsigned long long v) {
  return AngularLength::from_degrees(static_cast<double>(v));
}
}  // namespace literals

}  // namespace pyrafove
