#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "amiev/error.hpp"

namespace amiev {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Wraps an angle into [0, 2*pi).
inline double wrap_2pi(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

/// Wraps an angle difference into (-pi, pi].
inline double wrap_pi(double a) {
  double w = std::remainder(a, kTwoPi);
  if (w <= -std::numbers::pi) w += kTwoPi;
  return w;
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
  constexpr Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
  constexpr Point2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::hypot(x, y); }
};

/// Calibrated circular-displacement model of the rotating prism.
///
/// A fixed scene ray images at `p + d(theta)` where
/// `d(theta) = r(p) * (cos(theta + theta_b), sin(theta + theta_b))` and theta
/// is the encoder angle. With `k1` set, the radius grows radially:
/// `r(p) = r * (1 + k1 * rho^2)`, where rho is the distance from `center`
/// divided by the length of `center` (the half-diagonal when `center` is the
/// image middle).
struct CompensationParams {
  double r = 0.0;        // pixels
  double theta_b = 0.0;  // radians, [0, 2*pi)
  Point2 center{};
  std::optional<double> k1;

  void validate() const {
    if (!(r >= 0.0) || !std::isfinite(r)) fail(ErrorCode::InvalidArgument, "radius must be >= 0");
    if (!(theta_b >= 0.0 && theta_b < kTwoPi)) {
      fail(ErrorCode::InvalidArgument, "theta_b must lie in [0, 2*pi)");
    }
  }

  double radius_at(const Point2& p) const {
    if (!k1 || *k1 == 0.0) return r;
    const double norm = center.norm();
    if (norm <= 0.0) return r;
    const double rho = (p - center).norm() / norm;
    return r * (1.0 + *k1 * rho * rho);
  }
};

}  // namespace amiev
