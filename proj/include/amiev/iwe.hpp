#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "amiev/events.hpp"

namespace amiev {

/// Image of warped events: per-pixel accumulation, row-major.
struct IWE {
  int width = 0;
  int height = 0;
  std::vector<double> counts;

  IWE() = default;
  IWE(int w, int h) : width(w), height(h), counts(static_cast<std::size_t>(w) * h, 0.0) {}

  double& at(int x, int y) { return counts[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return counts[static_cast<std::size_t>(y) * width + x]; }

  double total() const {
    double s = 0.0;
    for (double c : counts) s += c;
    return s;
  }
};

enum class Binning { Nearest, Bilinear };

struct Accumulation {
  IWE iwe;
  std::size_t dropped = 0;
};

/// Adds one event of unit mass at (x, y). Polarity is ignored. Events whose
/// mass would partly fall outside the sensor are dropped whole, so the image
/// total always equals accumulated minus dropped.
inline bool splat(IWE& iwe, double x, double y, Binning binning) {
  if (binning == Binning::Nearest) {
    const double rx = std::floor(x + 0.5);
    const double ry = std::floor(y + 0.5);
    if (!(rx >= 0.0 && ry >= 0.0 && rx < iwe.width && ry < iwe.height)) return false;
    iwe.at(static_cast<int>(rx), static_cast<int>(ry)) += 1.0;
    return true;
  }
  if (!(x >= 0.0 && y >= 0.0 && x <= iwe.width - 1 && y <= iwe.height - 1)) return false;
  int x0 = static_cast<int>(x);
  int y0 = static_cast<int>(y);
  const double fx = x - x0;
  const double fy = y - y0;
  iwe.at(x0, y0) += (1.0 - fx) * (1.0 - fy);
  if (fx > 0.0) iwe.at(x0 + 1, y0) += fx * (1.0 - fy);
  if (fy > 0.0) iwe.at(x0, y0 + 1) += (1.0 - fx) * fy;
  if (fx > 0.0 && fy > 0.0) iwe.at(x0 + 1, y0 + 1) += fx * fy;
  return true;
}

inline Accumulation accumulate_iwe(const EventStream& stream, Binning binning = Binning::Nearest) {
  Accumulation acc{IWE(stream.width(), stream.height()), 0};
  for (const Event& e : stream.events()) {
    if (!splat(acc.iwe, e.x, e.y, binning)) ++acc.dropped;
  }
  return acc;
}

inline Accumulation accumulate_iwe(const WarpedStream& stream, Binning binning = Binning::Bilinear) {
  Accumulation acc{IWE(stream.resolution.width, stream.resolution.height), 0};
  for (const WarpedEvent& e : stream.events) {
    if (!splat(acc.iwe, e.x, e.y, binning)) ++acc.dropped;
  }
  return acc;
}

}  // namespace amiev
