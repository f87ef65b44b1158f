#pragma once

#include <cmath>

#include "amiev/error.hpp"

namespace amiev {

/// Plain 3-vector. Used for intermediates that are not unit length
/// (cross products, parallel/perpendicular decompositions).
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

/// Direction on the unit sphere. Construction normalizes, so the unit-norm
/// invariant holds for every instance.
class UnitVec3 {
 public:
  UnitVec3() : v_{0.0, 0.0, 1.0} {}
  UnitVec3(double x, double y, double z) : UnitVec3(Vec3{x, y, z}) {}
  explicit UnitVec3(const Vec3& v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      fail(ErrorCode::DegenerateGeometry, "cannot normalize a zero or non-finite vector");
    }
    v_ = v / n;
  }

  double x() const { return v_.x; }
  double y() const { return v_.y; }
  double z() const { return v_.z; }
  const Vec3& vec() const { return v_; }
  operator const Vec3&() const { return v_; }  // NOLINT(google-explicit-constructor)

  UnitVec3 operator-() const { return from_normalized(-v_); }

  /// Wraps a vector already known to be unit length; no renormalization.
  static UnitVec3 from_normalized(const Vec3& v) {
    UnitVec3 u;
    u.v_ = v;
    return u;
  }

 private:
  Vec3 v_;
};

inline const UnitVec3& camera_x() {
  static const UnitVec3 x = UnitVec3::from_normalized({1.0, 0.0, 0.0});
  return x;
}

inline const UnitVec3& camera_z() {
  static const UnitVec3 z = UnitVec3::from_normalized({0.0, 0.0, 1.0});
  return z;
}

}  // namespace amiev
