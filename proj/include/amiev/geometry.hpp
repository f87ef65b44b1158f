#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "amiev/error.hpp"
#include "amiev/params.hpp"

namespace amiev {

struct Segment {
  Point2 a;
  Point2 b;
};

struct Circle {
  Point2 center;
  double radius = 0.0;
};

/// Analytic ground-truth edges of a synthetic scene.
struct EdgeGeometry {
  std::vector<Segment> segments;
  std::vector<Circle> circles;

  bool empty() const { return segments.empty() && circles.empty(); }
  std::size_t size() const { return segments.size() + circles.size(); }

  EdgeGeometry translated(const Point2& d) const {
    EdgeGeometry g = *this;
    for (auto& s : g.segments) {
      s.a = s.a + d;
      s.b = s.b + d;
    }
    for (auto& c : g.circles) c.center = c.center + d;
    return g;
  }
};

/// Signed distance from `p` to a segment: positive to the left of a->b when
/// the foot of the perpendicular falls inside the segment, otherwise the
/// (positive) distance to the nearer endpoint.
inline double signed_distance(const Point2& p, const Segment& s) {
  const Point2 d = s.b - s.a;
  const double len2 = d.x * d.x + d.y * d.y;
  if (len2 <= 0.0) return (p - s.a).norm();
  const double u = ((p.x - s.a.x) * d.x + (p.y - s.a.y) * d.y) / len2;
  if (u < 0.0) return (p - s.a).norm();
  if (u > 1.0) return (p - s.b).norm();
  return (d.x * (p.y - s.a.y) - d.y * (p.x - s.a.x)) / std::sqrt(len2);
}

inline double signed_distance(const Point2& p, const Circle& c) {
  return (p - c.center).norm() - c.radius;
}

/// Signed distance to the nearest edge (by absolute value); ties keep the
/// first edge in declaration order.
inline double nearest_edge_distance(const Point2& p, const EdgeGeometry& g) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : g.segments) {
    const double d = signed_distance(p, s);
    if (std::abs(d) < std::abs(best)) best = d;
  }
  for (const auto& c : g.circles) {
    const double d = signed_distance(p, c);
    if (std::abs(d) < std::abs(best)) best = d;
  }
  return best;
}

/// Boolean edge mask.
struct EdgeMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;

  EdgeMap() = default;
  EdgeMap(int w, int h) : width(w), height(h), mask(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) { mask[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1)); }
};

namespace detail {

inline void mark(EdgeMap& m, const Point2& p) {
  const double fx = std::floor(p.x + 0.5);
  const double fy = std::floor(p.y + 0.5);
  if (fx >= 0 && fy >= 0 && fx < m.width && fy < m.height) m.set(static_cast<int>(fx), static_cast<int>(fy));
}

}  // namespace detail

/// Marks every pixel whose square [i-0.5, i+0.5) x [j-0.5, j+0.5) a
/// geometric edge passes through (sampled every 1/8 px along the edge).
inline EdgeMap rasterize(const EdgeGeometry& g, int width, int height) {
  EdgeMap m(width, height);
  constexpr double kStep = 0.125;
  for (const auto& s : g.segments) {
    const double len = (s.b - s.a).norm();
    const int n = std::max(1, static_cast<int>(std::ceil(len / kStep)));
    for (int i = 0; i <= n; ++i) detail::mark(m, s.a + (s.b - s.a) * (static_cast<double>(i) / n));
  }
  for (const auto& c : g.circles) {
    const int n = std::max(8, static_cast<int>(std::ceil(kTwoPi * c.radius / kStep)));
    for (int i = 0; i < n; ++i) {
      const double a = kTwoPi * i / n;
      detail::mark(m, {c.center.x + c.radius * std::cos(a), c.center.y + c.radius * std::sin(a)});
    }
  }
  return m;
}

/// Text form, one edge per line: `segment x0 y0 x1 y1` or `circle cx cy r`.
inline void write_edges(const EdgeGeometry& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot create " + path.string());
  out.precision(17);
  for (const auto& s : g.segments) out << "segment " << s.a.x << ' ' << s.a.y << ' ' << s.b.x << ' ' << s.b.y << '\n';
  for (const auto& c : g.circles) out << "circle " << c.center.x << ' ' << c.center.y << ' ' << c.radius << '\n';
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
}

inline EdgeGeometry read_edges(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  EdgeGeometry g;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "segment") {
      Segment s;
      if (!(ss >> s.a.x >> s.a.y >> s.b.x >> s.b.y)) fail(ErrorCode::ParseError, "line " + std::to_string(no) + ": bad segment");
      g.segments.push_back(s);
    } else if (kind == "circle") {
      Circle c;
      if (!(ss >> c.center.x >> c.center.y >> c.radius)) fail(ErrorCode::ParseError, "line " + std::to_string(no) + ": bad circle");
      g.circles.push_back(c);
    } else {
      fail(ErrorCode::ParseError, "line " + std::to_string(no) + ": unknown edge kind '" + kind + "'");
    }
  }
  return g;
}

}  // namespace amiev
