#pragma once

// Shared helpers for the test suites: seeded generators for property tests
// and an assertion for library error codes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "amiev/amiev.hpp"

namespace amiev::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  std::uint64_t u64(std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng_);
  }
  bool coin() { return integer(0, 1) == 1; }

  Vec3 vec3() { return {uniform(-1, 1), uniform(-1, 1), uniform(-1, 1)}; }

  UnitVec3 unit() {
    for (;;) {
      const Vec3 v = vec3();
      const double n = v.norm();
      if (n > 0.1 && n <= 1.0) return UnitVec3(v);
    }
  }

  // Ray arriving from the scene within `half_angle` of the optical axis.
  UnitVec3 incoming(double half_angle) {
    const double polar = uniform(0.0, half_angle);
    const double az = uniform(0.0, kTwoPi);
    return UnitVec3(std::sin(polar) * std::cos(az), std::sin(polar) * std::sin(az), -std::cos(polar));
  }

  // Sorted random stream; `theta` attaches random angles.
  EventStream stream(int width, int height, std::size_t n, bool theta = false, std::uint64_t t_max = 1000000) {
    std::vector<Event> ev(n);
    for (auto& e : ev) {
      e.t = u64(0, t_max);
      e.x = static_cast<std::uint16_t>(integer(0, width - 1));
      e.y = static_cast<std::uint16_t>(integer(0, height - 1));
      e.polarity = coin() ? 1 : -1;
    }
    std::sort(ev.begin(), ev.end(), event_less);
    std::vector<double> th;
    if (theta) {
      for (std::size_t i = 0; i < n; ++i) th.push_back(uniform(0.0, kTwoPi));
    }
    return EventStream({width, height}, std::move(ev), std::move(th));
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(cross(a, b).norm(), dot(a, b));
}

// Fresh scratch directory under the build tree's temp location.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("amiev_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace amiev::testing

#define EXPECT_AMIEV_ERROR(stmt, expected_code)                                  \
  do {                                                                           \
    try {                                                                        \
      stmt;                                                                      \
      ADD_FAILURE() << "expected " << ::amiev::to_string(expected_code);         \
    } catch (const ::amiev::Error& e_) {                                         \
      EXPECT_EQ(e_.code(), expected_code) << e_.what();                          \
    }                                                                            \
  } while (0)
