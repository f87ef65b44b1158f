#pragma once

// Analytic synthetic scenes: anti-aliased rendering plus exact edge geometry.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "amiev/error.hpp"
#include "amiev/geometry.hpp"
#include "amiev/keyvalue.hpp"
#include "amiev/params.hpp"

namespace amiev {

enum class Pattern { Edges, Checkerboard, Disk };
enum class MotionKind { Static, ConstantVelocity, Sinusoid };

struct SceneSpec {
  int width = 240;
  int height = 180;
  double duration_s = 1.0;

  Pattern pattern = Pattern::Edges;
  // Edges: bright bars on a dark background, one per tile, cycling through
  // the angles in scan order.
  std::vector<double> edge_angles_deg{0.0, 45.0, 90.0, 135.0};
  double bar_length = 36.0;
  double bar_width = 10.0;
  double spacing = 56.0;  // tile size
  double margin = 28.0;   // keep-out band along the sensor border
  double jitter_px = 0.0;  // random bar offset, uniform in +-jitter
  // Checkerboard: squares of `square` px, boundaries at offset + k * square.
  double square = 20.0;
  Point2 checker_offset{0.0, 0.0};
  // Disk.
  Point2 disk_center{120.0, 90.0};
  double disk_radius = 40.0;

  MotionKind motion = MotionKind::Static;
  Point2 velocity{};          // px/s
  double amplitude_px = 0.0;  // sinusoid
  double frequency_hz = 0.0;
  double direction_deg = 0.0;

  double intensity_low = 0.2;
  double intensity_high = 0.8;
  std::uint64_t seed = 42;

  void validate() const {
    if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "scene resolution must be positive");
    if (!(duration_s > 0.0)) fail(ErrorCode::InvalidArgument, "scene duration must be positive");
    if (!(intensity_low >= 0.0 && intensity_high >= 0.0)) fail(ErrorCode::InvalidArgument, "intensities must be >= 0");
    if (pattern == Pattern::Edges) {
      if (edge_angles_deg.empty()) fail(ErrorCode::InvalidArgument, "edge pattern needs at least one angle");
      if (!(bar_length > 0 && bar_width > 0 && spacing > 0)) fail(ErrorCode::InvalidArgument, "bad bar geometry");
      if (!(width - 2.0 * margin > 0.0 && height - 2.0 * margin > 0.0)) {
        fail(ErrorCode::InvalidArgument, "edge pattern does not fit the resolution");
      }
    }
    if (pattern == Pattern::Checkerboard && !(square >= 1.0)) fail(ErrorCode::InvalidArgument, "checker squares must be >= 1 px");
    if (pattern == Pattern::Disk && !(disk_radius > 0.0)) fail(ErrorCode::InvalidArgument, "disk radius must be positive");
  }

  /// Peak scene speed in px/s.
  double max_speed() const {
    switch (motion) {
      case MotionKind::Static: return 0.0;
      case MotionKind::ConstantVelocity: return velocity.norm();
      case MotionKind::Sinusoid: return kTwoPi * frequency_hz * std::abs(amplitude_px);
    }
    return 0.0;
  }

  /// Scene translation at time t (seconds).
  Point2 offset(double t) const {
    switch (motion) {
      case MotionKind::Static: return {};
      case MotionKind::ConstantVelocity: return velocity * t;
      case MotionKind::Sinusoid: {
        const double s = amplitude_px * std::sin(kTwoPi * frequency_hz * t);
        const double a = deg2rad(direction_deg);
        return {s * std::cos(a), s * std::sin(a)};
      }
    }
    return {};
  }

  static SceneSpec from_config(const KeyValues& kv) {
    SceneSpec s;
    s.width = static_cast<int>(kv.get_int("width", s.width));
    s.height = static_cast<int>(kv.get_int("height", s.height));
    s.duration_s = kv.get_double("duration_s", s.duration_s);
    const std::string pattern = kv.get_string("pattern", "edges");
    if (pattern == "edges") s.pattern = Pattern::Edges;
    else if (pattern == "checkerboard") s.pattern = Pattern::Checkerboard;
    else if (pattern == "disk") s.pattern = Pattern::Disk;
    else fail(ErrorCode::ParseError, "unknown pattern '" + pattern + "'");
    s.edge_angles_deg = kv.get_doubles("edge_angles_deg", s.edge_angles_deg);
    s.bar_length = kv.get_double("bar_length", s.bar_length);
    s.bar_width = kv.get_double("bar_width", s.bar_width);
    s.spacing = kv.get_double("spacing", s.spacing);
    s.margin = kv.get_double("margin", s.margin);
    s.jitter_px = kv.get_double("jitter_px", s.jitter_px);
    s.square = kv.get_double("square", s.square);
    s.checker_offset = {kv.get_double("checker_offset_x", s.checker_offset.x),
                        kv.get_double("checker_offset_y", s.checker_offset.y)};
    s.disk_center = {kv.get_double("disk_center_x", 0.5 * (s.width - 1)),
                     kv.get_double("disk_center_y", 0.5 * (s.height - 1))};
    s.disk_radius = kv.get_double("disk_radius", s.disk_radius);
    const std::string motion = kv.get_string("motion", "static");
    if (motion == "static") s.motion = MotionKind::Static;
    else if (motion == "constant") s.motion = MotionKind::ConstantVelocity;
    else if (motion == "sinusoid") s.motion = MotionKind::Sinusoid;
    else fail(ErrorCode::ParseError, "unknown motion '" + motion + "'");
    s.velocity = {kv.get_double("velocity_x", 0.0), kv.get_double("velocity_y", 0.0)};
    s.amplitude_px = kv.get_double("amplitude_px", 0.0);
    s.frequency_hz = kv.get_double("frequency_hz", 0.0);
    s.direction_deg = kv.get_double("direction_deg", 0.0);
    s.intensity_low = kv.get_double("intensity_low", s.intensity_low);
    s.intensity_high = kv.get_double("intensity_high", s.intensity_high);
    s.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(s.seed)));
    s.validate();
    return s;
  }
};

/// Rotated rectangle.
struct Bar {
  Point2 center;
  double angle = 0.0;  // radians, direction of the long side
  double length = 0.0;
  double width = 0.0;

  double signed_distance(const Point2& p) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const Point2 d = p - center;
    const double qx = std::abs(d.x * c + d.y * s) - 0.5 * length;
    const double qy = std::abs(-d.x * s + d.y * c) - 0.5 * width;
    const double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0);
    return std::hypot(ox, oy) + std::min(std::max(qx, qy), 0.0);
  }

  std::vector<Segment> outline() const {
    const double c = std::cos(angle), s = std::sin(angle);
    const Point2 u{c * 0.5 * length, s * 0.5 * length};
    const Point2 v{-s * 0.5 * width, c * 0.5 * width};
    const Point2 p0 = center - u - v, p1 = center + u - v, p2 = center + u + v, p3 = center - u + v;
    // Counter-clockwise in image coordinates: the bar interior is on the left.
    return {{p0, p1}, {p1, p2}, {p2, p3}, {p3, p0}};
  }
};

/// Integral over [x - 0.5, x + 0.5] of a +-1 square wave with half-period a
/// whose boundaries sit at offset + k * a (value +1 just above offset).
inline double box_filtered_square_wave(double x, double offset, double a) {
  auto antiderivative = [&](double u) {
    double m = std::fmod(u - offset, 2.0 * a);
    if (m < 0.0) m += 2.0 * a;
    return a - std::abs(m - a);
  };
  return antiderivative(x + 0.5) - antiderivative(x - 0.5);
}

/// Renders the scene at arbitrary times.
class SceneRenderer {
 public:
  explicit SceneRenderer(SceneSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    if (spec_.pattern == Pattern::Edges) layout_bars();
  }

  const SceneSpec& spec() const { return spec_; }
  const std::vector<Bar>& bars() const { return bars_; }

  /// Ground-truth edges at time t (seconds).
  EdgeGeometry edges(double t = 0.0) const { return static_edges().translated(spec_.offset(t)); }

  /// Intensity of the box-filtered scene around image point p at time t.
  double intensity(const Point2& p, double t) const { return intensity_at(p - spec_.offset(t)); }

  /// Intensity of every pixel center at time t.
  void render(double t, std::vector<float>& out) const {
    const int w = spec_.width, h = spec_.height;
    out.assign(static_cast<std::size_t>(w) * h, static_cast<float>(spec_.intensity_low));
    const Point2 off = spec_.offset(t);
    if (spec_.pattern != Pattern::Edges) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          out[static_cast<std::size_t>(y) * w + x] = static_cast<float>(intensity_at(Point2{double(x), double(y)} - off));
        }
      }
      return;
    }
    // Bars only touch pixels inside their bounding boxes.
    for (const Bar& bar : bars_) {
      const double reach = 0.5 * std::hypot(bar.length, bar.width) + 1.0;
      const Point2 c = bar.center + off;
      const int x0 = std::max(0, static_cast<int>(std::floor(c.x - reach)));
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x + reach)));
      const int y0 = std::max(0, static_cast<int>(std::floor(c.y - reach)));
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y + reach)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          float& px = out[static_cast<std::size_t>(y) * w + x];
          px = std::max(px, static_cast<float>(bar_intensity(bar, Point2{double(x), double(y)} - off)));
        }
      }
    }
  }

 private:
  double bar_intensity(const Bar& bar, const Point2& q) const {
    const double cov = std::clamp(0.5 - bar.signed_distance(q), 0.0, 1.0);
    return spec_.intensity_low + (spec_.intensity_high - spec_.intensity_low) * cov;
  }

  // Scene coordinates (motion removed).
  double intensity_at(const Point2& q) const {
    const double lo = spec_.intensity_low, hi = spec_.intensity_high;
    switch (spec_.pattern) {
      case Pattern::Edges: {
        double v = lo;
        const int cx = static_cast<int>(std::floor((q.x - cell_origin_.x) / kCell));
        const int cy = static_cast<int>(std::floor((q.y - cell_origin_.y) / kCell));
        if (cx < 0 || cy < 0 || cx >= cells_x_ || cy >= cells_y_) return v;
        for (std::size_t b : cells_[static_cast<std::size_t>(cy) * cells_x_ + cx]) {
          v = std::max(v, bar_intensity(bars_[b], q));
        }
        return v;
      }
      case Pattern::Checkerboard: {
        const double sx = box_filtered_square_wave(q.x, spec_.checker_offset.x, spec_.square);
        const double sy = box_filtered_square_wave(q.y, spec_.checker_offset.y, spec_.square);
        return lo + (hi - lo) * 0.5 * (1.0 + sx * sy);
      }
      case Pattern::Disk: {
        const double cov = std::clamp(spec_.disk_radius + 0.5 - (q - spec_.disk_center).norm(), 0.0, 1.0);
        return lo + (hi - lo) * cov;
      }
    }
    return lo;
  }

  void layout_bars() {
    std::mt19937_64 rng(spec_.seed);
    std::uniform_real_distribution<double> jitter(-spec_.jitter_px, spec_.jitter_px);
    const double x_span = spec_.width - 2.0 * spec_.margin;
    const double y_span = spec_.height - 2.0 * spec_.margin;
    const int nx = std::max(1, static_cast<int>(std::floor(x_span / spec_.spacing)));
    const int ny = std::max(1, static_cast<int>(std::floor(y_span / spec_.spacing)));
    const double x0 = 0.5 * (spec_.width - 1) - 0.5 * (nx - 1) * spec_.spacing;
    const double y0 = 0.5 * (spec_.height - 1) - 0.5 * (ny - 1) * spec_.spacing;
    std::size_t k = 0;
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i, ++k) {
        Bar b;
        b.center = {x0 + i * spec_.spacing, y0 + j * spec_.spacing};
        if (spec_.jitter_px > 0.0) {
          b.center.x += jitter(rng);
          b.center.y += jitter(rng);
        }
        b.angle = deg2rad(spec_.edge_angles_deg[k % spec_.edge_angles_deg.size()]);
        b.length = spec_.bar_length;
        b.width = spec_.bar_width;
        bars_.push_back(b);
      }
    }
    index_bars();
  }

  // Bucket grid over the bars' bounding boxes for point queries.
  void index_bars() {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
    for (std::size_t i = 0; i < bars_.size(); ++i) {
      const double reach = 0.5 * std::hypot(bars_[i].length, bars_[i].width) + 1.0;
      const Point2 c = bars_[i].center;
      x0 = i ? std::min(x0, c.x - reach) : c.x - reach;
      y0 = i ? std::min(y0, c.y - reach) : c.y - reach;
      x1 = i ? std::max(x1, c.x + reach) : c.x + reach;
      y1 = i ? std::max(y1, c.y + reach) : c.y + reach;
    }
    cell_origin_ = {x0, y0};
    cells_x_ = std::max(1, static_cast<int>(std::ceil((x1 - x0) / kCell)));
    cells_y_ = std::max(1, static_cast<int>(std::ceil((y1 - y0) / kCell)));
    cells_.assign(static_cast<std::size_t>(cells_x_) * cells_y_, {});
    for (std::size_t i = 0; i < bars_.size(); ++i) {
      const double reach = 0.5 * std::hypot(bars_[i].length, bars_[i].width) + 1.0;
      const Point2 c = bars_[i].center;
      const int ax = std::max(0, static_cast<int>(std::floor((c.x - reach - x0) / kCell)));
      const int bx = std::min(cells_x_ - 1, static_cast<int>(std::floor((c.x + reach - x0) / kCell)));
      const int ay = std::max(0, static_cast<int>(std::floor((c.y - reach - y0) / kCell)));
      const int by = std::min(cells_y_ - 1, static_cast<int>(std::floor((c.y + reach - y0) / kCell)));
      for (int y = ay; y <= by; ++y) {
        for (int x = ax; x <= bx; ++x) cells_[static_cast<std::size_t>(y) * cells_x_ + x].push_back(i);
      }
    }
  }

  EdgeGeometry static_edges() const {
    EdgeGeometry g;
    switch (spec_.pattern) {
      case Pattern::Edges:
        for (const Bar& b : bars_) {
          for (const Segment& s : b.outline()) g.segments.push_back(s);
        }
        break;
      case Pattern::Checkerboard: {
        const double lo_x = -0.5, hi_x = spec_.width - 0.5;
        const double lo_y = -0.5, hi_y = spec_.height - 0.5;
        const double a = spec_.square;
        for (double c = spec_.checker_offset.x + std::ceil((lo_x - spec_.checker_offset.x) / a) * a; c < hi_x; c += a) {
          g.segments.push_back({{c, lo_y}, {c, hi_y}});
        }
        for (double c = spec_.checker_offset.y + std::ceil((lo_y - spec_.checker_offset.y) / a) * a; c < hi_y; c += a) {
          g.segments.push_back({{lo_x, c}, {hi_x, c}});
        }
        break;
      }
      case Pattern::Disk:
        g.circles.push_back({spec_.disk_center, spec_.disk_radius});
        break;
    }
    return g;
  }

  static constexpr double kCell = 8.0;

  SceneSpec spec_;
  std::vector<Bar> bars_;
  Point2 cell_origin_{};
  int cells_x_ = 0;
  int cells_y_ = 0;
  std::vector<std::vector<std::size_t>> cells_;
};

}  // namespace amiev
