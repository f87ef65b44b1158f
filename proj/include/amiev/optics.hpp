#pragma once

// Geometric optics of a wedge prism rotating in front of a pinhole camera.
//
// Conventions:
//  * The camera looks along +z. Rays are described by their direction of
//    travel, so light arriving from the scene has a negative z component.
//  * The first prism face is perpendicular to z; the second face has normal
//    z_w, obtained by tilting z about the camera x axis by alpha and then
//    rotating about z by the wedge azimuth theta.
//  * Refraction angles are measured as acute angles to the face normal; a
//    refraction is a rotation of the ray about (ray x normal) towards the
//    normal by (incidence - refracted).
//  * Image coordinates: pixel (i, j) has its center at (i, j).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "amiev/error.hpp"
#include "amiev/golden.hpp"
#include "amiev/params.hpp"
#include "amiev/vec3.hpp"

namespace amiev {

inline constexpr double kAirIndex = 1.0;

struct PrismConfig {
  double alpha = deg2rad(1.0);  // wedge tilt, radians
  double n = 1.55;              // refractive index
  double rotation_speed = 12.0;  // revolutions per second

  void validate() const {
    if (!(n > 1.0)) fail(ErrorCode::InvalidArgument, "refractive index must exceed 1");
    if (!(alpha > 0.0 && alpha < deg2rad(10.0))) {
      fail(ErrorCode::InvalidArgument, "wedge angle must lie in (0, 10) degrees");
    }
    if (!(rotation_speed >= 0.0)) fail(ErrorCode::InvalidArgument, "rotation speed must be >= 0");
  }

  double period_s() const { return rotation_speed > 0.0 ? 1.0 / rotation_speed : INFINITY; }
};

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const {
    if (!(fx > 0.0 && fy > 0.0)) fail(ErrorCode::InvalidArgument, "focal lengths must be positive");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
      fail(ErrorCode::InvalidArgument, "principal point must lie inside the sensor");
    }
  }

  /// Intrinsics for a sensor whose horizontal field of view is `hfov`.
  static Intrinsics from_hfov(int width, int height, double hfov) {
    Intrinsics k;
    k.width = width;
    k.height = height;
    k.fx = k.fy = 0.5 * width / std::tan(0.5 * hfov);
    k.cx = 0.5 * (width - 1);
    k.cy = 0.5 * (height - 1);
    return k;
  }
};

/// Snell's law: angle of the refracted ray for a ray crossing from index
/// `n_from` into `n_to`.
inline double snell_refract(double incidence_angle, double n_from, double n_to) {
  const double s = n_from * std::sin(incidence_angle) / n_to;
  if (std::abs(s) > 1.0) {
    fail(ErrorCode::TotalInternalReflection, "total internal reflection");
  }
  return std::asin(s);
}

/// Rodrigues rotation of `v` about `axis` by `angle` (right-handed).
inline Vec3 rotate_about_axis(const Vec3& v, const Vec3& axis, double angle) {
  if (std::abs(axis.norm() - 1.0) > 1e-6) {
    fail(ErrorCode::DegenerateAxis, "rotation axis must be unit length");
  }
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return v * c + cross(axis, v) * s + axis * (dot(axis, v) * (1.0 - c));
}

inline UnitVec3 rotate_about_axis(const UnitVec3& v, const Vec3& axis, double angle) {
  return UnitVec3(rotate_about_axis(v.vec(), axis, angle));
}

/// Normal of the tilted prism face for wedge azimuth `theta`:
/// R(z, theta) * R(x, alpha) * z.
inline UnitVec3 wedge_axis(double theta, double alpha) {
  const double sa = std::sin(alpha);
  return UnitVec3(sa * std::sin(theta), -sa * std::cos(theta), std::cos(alpha));
}

namespace detail {

/// Refracts direction `v` at a face whose normal `m` points along the
/// direction of travel.
inline Vec3 refract_at_face(const Vec3& v, const Vec3& m, double n_from, double n_to) {
  const Vec3 axis = cross(v, m);
  const double s = axis.norm();
  if (s < 1e-15) return v;  // normal incidence
  const double incidence = std::atan2(s, dot(v, m));
  const double refracted = snell_refract(incidence, n_from, n_to);
  return rotate_about_axis(v, axis / s, incidence - refracted);
}

}  // namespace detail

/// Exact two-surface transmission: air -> glass at the face normal to z,
/// then glass -> air at the face normal to `z_w`.
inline UnitVec3 prism_transmit_full(const UnitVec3& v_in, const UnitVec3& z_w, double n) {
  const Vec3 v_p = detail::refract_at_face(v_in, -camera_z().vec(), kAirIndex, n);
  const Vec3 v_o = detail::refract_at_face(v_p, -z_w.vec(), n, kAirIndex);
  return UnitVec3(v_o);
}

/// Single-rotation approximation: rotate `v_in` by `delta` about the
/// normalized z_w x z.
inline UnitVec3 prism_transmit_simplified(const UnitVec3& v_in, const UnitVec3& z_w, double delta) {
  const Vec3 axis = cross(z_w, camera_z());
  const double s = axis.norm();
  if (s < 1e-9) fail(ErrorCode::DegenerateGeometry, "wedge axis parallel to the optical axis");
  return rotate_about_axis(v_in, axis / s, delta);
}

/// Deviation of a ray entering along the optical axis. This is the
/// "refraction angle" of the wedge, close to (n - 1) * alpha.
inline double axial_deviation(const PrismConfig& prism) {
  return std::asin(prism.n * std::sin(prism.alpha)) - prism.alpha;
}

/// Decomposition of `v` relative to the normalized z_w x z axis.
struct AxisDecomposition {
  Vec3 parallel;
  Vec3 perpendicular;
};

inline AxisDecomposition decompose(const Vec3& v, const UnitVec3& z_w) {
  const Vec3 axis = cross(z_w, camera_z());
  const double s = axis.norm();
  if (s < 1e-9) fail(ErrorCode::DegenerateGeometry, "wedge axis parallel to the optical axis");
  const Vec3 e = axis / s;
  const Vec3 par = e * dot(v, e);
  return {par, v - par};
}

inline Point2 project(const Vec3& v, const Intrinsics& k) {
  if (!(v.z < -1e-12)) fail(ErrorCode::BehindCamera, "ray does not travel into the camera");
  return {k.fx * v.x / v.z + k.cx, k.fy * v.y / v.z + k.cy};
}

inline UnitVec3 backproject(const Point2& p, const Intrinsics& k) {
  return UnitVec3(-(p.x - k.cx) / k.fx, -(p.y - k.cy) / k.fy, -1.0);
}

/// Apparent image displacement of a fixed scene ray at encoder angle `theta`.
inline Point2 pixel_displacement(const Point2& p, double theta, const CompensationParams& params) {
  const double r = params.radius_at(p);
  const double phase = theta + params.theta_b;
  return {r * std::cos(phase), r * std::sin(phase)};
}

/// Image displacement of an on-axis scene ray through the prism, in pixels.
inline double deflection_radius_px(const PrismConfig& prism, const Intrinsics& k) {
  const Point2 c{k.cx, k.cy};
  const UnitVec3 out = prism_transmit_full(backproject(c, k), wedge_axis(0.0, prism.alpha), prism.n);
  return (project(out, k) - c).norm();
}

/// Encoder angle theta maps to wedge azimuth theta + theta_b - pi/2 so that
/// the full model and the circle model share the meaning of theta_b: at
/// encoder angle -theta_b both displace along +x.
inline double wedge_azimuth(double encoder_theta, double theta_b) {
  return encoder_theta + theta_b - 0.5 * std::numbers::pi;
}

/// Scene ray that the full prism model maps onto the observed ray `v_out`.
inline UnitVec3 invert_transmission(const UnitVec3& v_out, const UnitVec3& z_w, double n) {
  Vec3 v = v_out.vec();
  for (int it = 0; it < 50; ++it) {
    const UnitVec3 cur(v);
    const Vec3 residual = v_out.vec() - prism_transmit_full(cur, z_w, n).vec();
    v = (cur.vec() + residual);
    if (residual.norm() < 1e-14) break;
  }
  return UnitVec3(v);
}

/// Per-pixel displacement field of the exact prism model, tabulated over the
/// encoder angle and a coarse spatial grid and interpolated (linearly in
/// angle, bilinearly in space). Used to synthesize streams whose geometry is
/// not the circle model.
class FullOpticsDisplacement {
 public:
  FullOpticsDisplacement(const PrismConfig& prism, const Intrinsics& k, double theta_b,
                         int grid_step = 8, int angle_samples = 360)
      : k_(k), step_(grid_step), angle_samples_(angle_samples) {
    prism.validate();
    k.validate();
    if (grid_step < 1 || angle_samples < 8) fail(ErrorCode::InvalidArgument, "bad table resolution");
    nx_ = (k.width - 1) / step_ + 2;
    ny_ = (k.height - 1) / step_ + 2;
    table_.resize(static_cast<std::size_t>(angle_samples_) * nx_ * ny_);
    for (int a = 0; a < angle_samples_; ++a) {
      const double theta = kTwoPi * a / angle_samples_;
      const UnitVec3 z_w = wedge_axis(wedge_azimuth(theta, theta_b), prism.alpha);
      for (int gy = 0; gy < ny_; ++gy) {
        for (int gx = 0; gx < nx_; ++gx) {
          const Point2 p{static_cast<double>(gx * step_), static_cast<double>(gy * step_)};
          const UnitVec3 seen = backproject(p, k);
          const UnitVec3 source = invert_transmission(seen, z_w, prism.n);
          table_[index(a, gx, gy)] = p - project(source, k);
        }
      }
    }
  }

  /// Displacement d such that pixel `p` sees the scene point imaged at p - d
  /// without the prism.
  Point2 operator()(const Point2& p, double theta) const {
    const double fa = wrap_2pi(theta) / kTwoPi * angle_samples_;
    const int a0 = std::min(static_cast<int>(fa), angle_samples_ - 1);
    const int a1 = (a0 + 1) % angle_samples_;
    const double wa = fa - a0;
    return spatial(a0, p) * (1.0 - wa) + spatial(a1, p) * wa;
  }

  int width() const { return k_.width; }
  int height() const { return k_.height; }

  /// Largest tabulated displacement magnitude.
  double max_radius() const {
    double m = 0.0;
    for (const auto& d : table_) m = std::max(m, d.norm());
    return m;
  }

 private:
  std::size_t index(int a, int gx, int gy) const {
    return (static_cast<std::size_t>(a) * ny_ + gy) * nx_ + gx;
  }

  Point2 spatial(int a, const Point2& p) const {
    const double fx = std::clamp(p.x / step_, 0.0, static_cast<double>(nx_ - 1) - 1e-9);
    const double fy = std::clamp(p.y / step_, 0.0, static_cast<double>(ny_ - 1) - 1e-9);
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const double wx = fx - x0;
    const double wy = fy - y0;
    const Point2 top = table_[index(a, x0, y0)] * (1.0 - wx) + table_[index(a, x0 + 1, y0)] * wx;
    const Point2 bot =
        table_[index(a, x0, y0 + 1)] * (1.0 - wx) + table_[index(a, x0 + 1, y0 + 1)] * wx;
    return top * (1.0 - wy) + bot * wy;
  }

  Intrinsics k_;
  int step_;
  int angle_samples_;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<Point2> table_;
};

struct SimplificationReport {
  double max_px = 0.0;  // largest reprojection discrepancy
  double mean_px = 0.0;
  double delta_min = 0.0;  // range of fitted rotation angles, radians
  double delta_max = 0.0;
  std::size_t samples = 0;
};

/// Compares the exact transmission with the single-rotation model over every
/// `grid_step`-th pixel and `theta_samples` wedge azimuths. Each pixel gets
/// its own rotation angle, the one minimizing its largest discrepancy over
/// the azimuths; with `per_pixel` false one angle serves the whole sensor.
inline SimplificationReport simplification_error(const PrismConfig& prism, const Intrinsics& k, int grid_step = 8,
                                                 int theta_samples = 36, bool per_pixel = true) {
  prism.validate();
  k.validate();
  if (grid_step < 1 || theta_samples < 1) fail(ErrorCode::InvalidArgument, "bad sweep resolution");
  std::vector<UnitVec3> axes;
  for (int a = 0; a < theta_samples; ++a) axes.push_back(wedge_axis(kTwoPi * a / theta_samples, prism.alpha));
  struct Pixel {
    UnitVec3 in;
    std::vector<Point2> full;
  };
  std::vector<Pixel> pixels;
  for (int y = 0; y < k.height; y += grid_step) {
    for (int x = 0; x < k.width; x += grid_step) {
      Pixel px{backproject({double(x), double(y)}, k), {}};
      for (const auto& z_w : axes) px.full.push_back(project(prism_transmit_full(px.in, z_w, prism.n), k));
      pixels.push_back(std::move(px));
    }
  }
  auto errors = [&](const Pixel& px, double delta, double& worst, double& sum) {
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const double e = (project(prism_transmit_simplified(px.in, axes[a], delta), k) - px.full[a]).norm();
      worst = std::max(worst, e);
      sum += e;
    }
  };
  auto worst_of = [&](const Pixel& px, double delta) {
    double worst = 0.0, sum = 0.0;
    errors(px, delta, worst, sum);
    return worst;
  };
  const double d0 = axial_deviation(prism);
  const double lo = 0.25 * d0, hi = 4.0 * d0, tol = 1e-9 * d0;
  SimplificationReport rep;
  double sum = 0.0;
  double global = 0.0;
  if (!per_pixel) {
    global = golden_section_minimize(
                 [&](double d) {
                   double w = 0.0;
                   for (const auto& px : pixels) w = std::max(w, worst_of(px, d));
                   return w;
                 },
                 lo, hi, tol)
                 .x;
  }
  rep.delta_min = INFINITY;
  rep.delta_max = 0.0;
  for (const auto& px : pixels) {
    const double d = per_pixel ? golden_section_minimize([&](double x) { return worst_of(px, x); }, lo, hi, tol).x : global;
    rep.delta_min = std::min(rep.delta_min, d);
    rep.delta_max = std::max(rep.delta_max, d);
    errors(px, d, rep.max_px, sum);
  }
  rep.samples = pixels.size() * axes.size();
  rep.mean_px = sum / static_cast<double>(rep.samples);
  return rep;
}

/// Circle-model displacement as a callable with the same shape as
/// FullOpticsDisplacement.
class CircleDisplacement {
 public:
  explicit CircleDisplacement(CompensationParams params) : params_(params) {}
  Point2 operator()(const Point2& p, double theta) const { return pixel_displacement(p, theta, params_); }
  // rho <= 1 inside the sensor when the center is the image middle.
  double max_radius() const { return params_.r * (1.0 + std::max(0.0, params_.k1.value_or(0.0))); }
  bool uniform() const { return !params_.k1 || *params_.k1 == 0.0; }
  const CompensationParams& params() const { return params_; }

 private:
  CompensationParams params_;
};

}  // namespace amiev
