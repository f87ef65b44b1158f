#pragma once

// Texture-quality metrics: per-event KDE density spread, entropy of the
// binarized event image, and ODS-F edge scores.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "amiev/error.hpp"
#include "amiev/events.hpp"
#include "amiev/frames.hpp"
#include "amiev/geometry.hpp"
#include "amiev/iwe.hpp"
#include "amiev/keyvalue.hpp"
#include "amiev/parallel.hpp"

namespace amiev {

// ---------------------------------------------------------------------------
// KDE density

struct KdeOptions {
  // Per-axis Gaussian bandwidth (x, y, t) in unit-cube coordinates; Scott's
  // rule when unset.
  std::optional<std::array<double, 3>> bandwidth;
  std::size_t exact_limit = 100000;
  int grid_cells = 160;  // per axis, grid evaluation only
  std::optional<double> low_cutoff;
  int histogram_bins = 32;
  int threads = 1;
};

struct DensityReport {
  std::vector<double> density;  // per event, in event order
  std::array<double, 3> bandwidth{};
  std::vector<std::size_t> histogram;
  double histogram_max = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double low_cutoff = 0.0;
  double low_fraction = 0.0;
  bool exact = true;
};

namespace detail {

inline std::vector<std::array<double, 3>> unit_cube(const EventStream& s) {
  std::array<double, 3> lo{}, hi{};
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  std::vector<std::array<double, 3>> pts;
  pts.reserve(s.size());
  for (const Event& e : s.events()) {
    const std::array<double, 3> p{double(e.x), double(e.y), double(e.t)};
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
    pts.push_back(p);
  }
  for (auto& p : pts) {
    for (int a = 0; a < 3; ++a) p[a] = hi[a] > lo[a] ? (p[a] - lo[a]) / (hi[a] - lo[a]) : 0.0;
  }
  return pts;
}

inline std::array<double, 3> scott_bandwidth(const std::vector<std::array<double, 3>>& pts) {
  const double n = static_cast<double>(pts.size());
  const double factor = std::pow(n, -1.0 / 7.0);
  std::array<double, 3> h{};
  for (int a = 0; a < 3; ++a) {
    double mean = 0.0;
    for (const auto& p : pts) mean += p[a];
    mean /= n;
    double var = 0.0;
    for (const auto& p : pts) var += (p[a] - mean) * (p[a] - mean);
    const double sd = pts.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    h[a] = (sd > 0.0 ? sd : 1.0) * factor;
  }
  return h;
}

inline double kernel_norm(const std::array<double, 3>& h) {
  return 1.0 / (std::pow(2.0 * std::numbers::pi, 1.5) * h[0] * h[1] * h[2]);
}

inline std::vector<double> kde_exact(const std::vector<std::array<double, 3>>& pts, const std::array<double, 3>& h,
                                     int threads) {
  const std::size_t n = pts.size();
  std::vector<double> out(n);
  const double norm = kernel_norm(h) / static_cast<double>(n);
  std::array<double, 3> inv{};
  for (int a = 0; a < 3; ++a) inv[a] = 1.0 / (h[a] * h[a]);
  parallel_for(n, threads, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t i = b; i < e; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double dx = pts[i][0] - pts[j][0];
        const double dy = pts[i][1] - pts[j][1];
        const double dt = pts[i][2] - pts[j][2];
        sum += std::exp(-0.5 * (dx * dx * inv[0] + dy * dy * inv[1] + dt * dt * inv[2]));
      }
      out[i] = norm * sum;
    }
  });
  return out;
}

// Linear binning onto a regular grid, separable Gaussian smoothing, and
// trilinear read-back at each event.
inline std::vector<double> kde_grid(const std::vector<std::array<double, 3>>& pts, const std::array<double, 3>& h,
                                    int cells, int threads) {
  const int g = std::max(cells, 8);
  const std::size_t g2 = static_cast<std::size_t>(g) * g;
  const double step = 1.0 / (g - 1);
  std::vector<double> grid(g2 * g, 0.0);
  auto at = [&](int x, int y, int t) -> double& { return grid[static_cast<std::size_t>(t) * g2 + static_cast<std::size_t>(y) * g + x]; };

  auto split = [&](double u, int& i0, double& w1) {
    const double f = std::clamp(u / step, 0.0, static_cast<double>(g - 1));
    i0 = std::min(static_cast<int>(f), g - 2);
    w1 = f - i0;
  };
  for (const auto& p : pts) {
    int ix, iy, it;
    double wx, wy, wt;
    split(p[0], ix, wx);
    split(p[1], iy, wy);
    split(p[2], it, wt);
    for (int c = 0; c < 8; ++c) {
      const int dx = c & 1, dy = (c >> 1) & 1, dt = (c >> 2) & 1;
      const double w = (dx ? wx : 1 - wx) * (dy ? wy : 1 - wy) * (dt ? wt : 1 - wt);
      at(ix + dx, iy + dy, it + dt) += w;
    }
  }

  for (int axis = 0; axis < 3; ++axis) {
    const double sigma = h[axis] / step;
    const int reach = std::max(1, static_cast<int>(std::ceil(5.0 * sigma)));
    std::vector<double> k(2 * reach + 1);
    for (int i = -reach; i <= reach; ++i) k[i + reach] = std::exp(-0.5 * (i / sigma) * (i / sigma));
    const std::size_t stride = axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(g) : g2;
    std::vector<double> src = grid;
    // Lines along `axis`, indexed by the other two coordinates.
    parallel_for(g2, threads, [&](std::size_t b, std::size_t e, std::size_t) {
      std::vector<double> line(g);
      for (std::size_t l = b; l < e; ++l) {
        const std::size_t u = l % g, v = l / g;
        std::size_t base = 0;
        if (axis == 0) base = v * g2 + u * g;
        else if (axis == 1) base = v * g2 + u;
        else base = v * g + u;
        for (int i = 0; i < g; ++i) {
          double s = 0.0;
          const int j0 = std::max(0, i - reach), j1 = std::min(g - 1, i + reach);
          for (int j = j0; j <= j1; ++j) s += k[j - i + reach] * src[base + j * stride];
          line[i] = s;
        }
        for (int i = 0; i < g; ++i) grid[base + i * stride] = line[i];
      }
    });
  }

  const double norm = kernel_norm(h) / static_cast<double>(pts.size());
  std::vector<double> out(pts.size());
  parallel_for(pts.size(), threads, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t i = b; i < e; ++i) {
      int ix, iy, it;
      double wx, wy, wt;
      split(pts[i][0], ix, wx);
      split(pts[i][1], iy, wy);
      split(pts[i][2], it, wt);
      double s = 0.0;
      for (int c = 0; c < 8; ++c) {
        const int dx = c & 1, dy = (c >> 1) & 1, dt = (c >> 2) & 1;
        s += (dx ? wx : 1 - wx) * (dy ? wy : 1 - wy) * (dt ? wt : 1 - wt) *
             grid[static_cast<std::size_t>(it + dt) * g2 + static_cast<std::size_t>(iy + dy) * g + ix + dx];
      }
      out[i] = norm * std::max(0.0, s);
    }
  });
  return out;
}

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  const double f = pos - static_cast<double>(i);
  return i + 1 < v.size() ? v[i] * (1.0 - f) + v[i + 1] * f : v[i];
}

}  // namespace detail

/// Gaussian KDE evaluated at every event, with (x, y, t) scaled to the unit
/// cube by the stream's own extent. Densities integrate to one over the cube,
/// so values are comparable between streams of different sizes.
inline DensityReport kde_density_variance(const EventStream& stream, const KdeOptions& opt = {}) {
  if (stream.empty()) fail(ErrorCode::EmptyStream, "cannot estimate density of an empty stream");
  const auto pts = detail::unit_cube(stream);
  DensityReport r;
  r.bandwidth = opt.bandwidth ? *opt.bandwidth : detail::scott_bandwidth(pts);
  for (double h : r.bandwidth) {
    if (!(h > 0.0)) fail(ErrorCode::InvalidArgument, "KDE bandwidth must be positive");
  }
  r.exact = pts.size() <= opt.exact_limit;
  r.density = r.exact ? detail::kde_exact(pts, r.bandwidth, opt.threads)
                      : detail::kde_grid(pts, r.bandwidth, opt.grid_cells, opt.threads);
  const double n = static_cast<double>(r.density.size());
  for (double d : r.density) r.mean += d;
  r.mean /= n;
  for (double d : r.density) r.variance += (d - r.mean) * (d - r.mean);
  r.variance /= n;
  r.low_cutoff = opt.low_cutoff ? *opt.low_cutoff : detail::quantile(r.density, 0.1);
  std::size_t low = 0;
  for (double d : r.density) low += d < r.low_cutoff ? 1 : 0;
  r.low_fraction = static_cast<double>(low) / n;
  const int bins = std::max(1, opt.histogram_bins);
  r.histogram.assign(static_cast<std::size_t>(bins), 0);
  r.histogram_max = *std::max_element(r.density.begin(), r.density.end());
  for (double d : r.density) {
    const int b = r.histogram_max > 0.0 ? std::min(bins - 1, static_cast<int>(d / r.histogram_max * bins)) : 0;
    ++r.histogram[static_cast<std::size_t>(b)];
  }
  return r;
}

// ---------------------------------------------------------------------------
// Entropy

inline double binary_entropy(double p) {
  auto term = [](double q) { return q > 0.0 ? -q * std::log2(q) : 0.0; };
  return term(p) + term(1.0 - p);
}

/// Entropy in bits of the active/inactive pixel distribution (active means
/// count > 0).
inline double binarized_entropy(const IWE& iwe) {
  if (iwe.counts.empty()) return 0.0;
  std::size_t active = 0;
  for (double c : iwe.counts) active += c > 0.0 ? 1 : 0;
  return binary_entropy(static_cast<double>(active) / static_cast<double>(iwe.counts.size()));
}

// ---------------------------------------------------------------------------
// Edge scores

struct EdgeScore {
  std::size_t matched = 0;
  std::size_t predicted = 0;
  std::size_t truth = 0;

  double precision() const { return predicted ? double(matched) / double(predicted) : (truth ? 0.0 : 1.0); }
  double recall() const { return truth ? double(matched) / double(truth) : (predicted ? 0.0 : 1.0); }
  double f1() const {
    if (predicted == 0 && truth == 0) return 1.0;
    const double p = precision(), r = recall();
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  EdgeScore& operator+=(const EdgeScore& o) {
    matched += o.matched;
    predicted += o.predicted;
    truth += o.truth;
    return *this;
  }
};

/// One-to-one matching of predicted to ground-truth edge pixels within
/// `radius` (Euclidean), greedily taking the closest pairs first; equal
/// distances are resolved by predicted then ground-truth scan order.
inline EdgeScore match_edges(const EdgeMap& pred, const EdgeMap& gt, double radius) {
  if (pred.width != gt.width || pred.height != gt.height) {
    fail(ErrorCode::DimensionMismatch, "edge maps differ in size");
  }
  if (!(radius >= 0.0)) fail(ErrorCode::InvalidArgument, "match radius must be >= 0");
  EdgeScore s;
  s.predicted = pred.count();
  s.truth = gt.count();
  struct Pair {
    int d2;
    std::size_t p, g;
  };
  std::vector<Pair> pairs;
  const int reach = static_cast<int>(std::floor(radius));
  const double r2 = radius * radius;
  for (int y = 0; y < pred.height; ++y) {
    for (int x = 0; x < pred.width; ++x) {
      if (!pred.at(x, y)) continue;
      for (int v = std::max(0, y - reach); v <= std::min(gt.height - 1, y + reach); ++v) {
        for (int u = std::max(0, x - reach); u <= std::min(gt.width - 1, x + reach); ++u) {
          const int d2 = (u - x) * (u - x) + (v - y) * (v - y);
          if (gt.at(u, v) && d2 <= r2 + 1e-9) {
            pairs.push_back({d2, static_cast<std::size_t>(y) * pred.width + x, static_cast<std::size_t>(v) * gt.width + u});
          }
        }
      }
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.p != b.p) return a.p < b.p;
    return a.g < b.g;
  });
  std::vector<std::uint8_t> used_p(pred.mask.size(), 0), used_g(gt.mask.size(), 0);
  for (const Pair& pr : pairs) {
    if (used_p[pr.p] || used_g[pr.g]) continue;
    used_p[pr.p] = used_g[pr.g] = 1;
    ++s.matched;
  }
  return s;
}

inline double ods_f(const EdgeMap& pred, const EdgeMap& gt, double radius) {
  return match_edges(pred, gt, radius).f1();
}

/// Pixels with count >= level.
inline EdgeMap binarize(const IWE& iwe, double level) {
  EdgeMap m(iwe.width, iwe.height);
  for (std::size_t i = 0; i < iwe.counts.size(); ++i) m.mask[i] = iwe.counts[i] >= level ? 1 : 0;
  return m;
}

/// Count levels 1 .. max count (at most `max_levels`, evenly spaced).
inline std::vector<double> default_thresholds(const IWE& iwe, int max_levels = 64) {
  double peak = 0.0;
  for (double c : iwe.counts) peak = std::max(peak, c);
  std::vector<double> out;
  if (peak < 1.0) return {peak > 0.0 ? peak : 1.0};
  const int n = std::min(max_levels, static_cast<int>(std::floor(peak)));
  for (int i = 0; i < n; ++i) out.push_back(n == 1 ? 1.0 : 1.0 + (std::floor(peak) - 1.0) * i / (n - 1));
  return out;
}

struct OdsResult {
  double f1 = 0.0;
  double threshold = 0.0;
  std::vector<double> thresholds;
  std::vector<EdgeScore> scores;  // aggregated over the dataset, per threshold
};

/// Optimal-dataset-scale F1: one threshold shared by every image, matches
/// aggregated over the dataset, best F1 over the thresholds.
inline OdsResult ods_f(const std::vector<const IWE*>& images, const std::vector<const EdgeMap*>& truths,
                       double radius, const std::vector<double>& thresholds) {
  if (images.size() != truths.size()) fail(ErrorCode::DimensionMismatch, "need one ground truth per image");
  if (thresholds.empty()) fail(ErrorCode::InvalidArgument, "no thresholds given");
  OdsResult r;
  r.thresholds = thresholds;
  r.scores.resize(thresholds.size());
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      r.scores[k] += match_edges(binarize(*images[i], thresholds[k]), *truths[i], radius);
    }
    const double f = r.scores[k].f1();
    if (k == 0 || f > r.f1) {
      r.f1 = f;
      r.threshold = thresholds[k];
    }
  }
  return r;
}

inline OdsResult ods_f(const IWE& iwe, const EdgeMap& gt, double radius, const std::vector<double>& thresholds) {
  return ods_f(std::vector<const IWE*>{&iwe}, std::vector<const EdgeMap*>{&gt}, radius, thresholds);
}

// ---------------------------------------------------------------------------
// Reports

struct StreamMetrics {
  std::string label;
  std::size_t events = 0;
  double kde_variance = 0.0;
  double low_density_fraction = 0.0;
  double entropy = 0.0;
  std::optional<double> ods_f;
  std::optional<double> ods_threshold;
  std::optional<double> edge_spread;
  std::optional<IWE> iwe;
};

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string opt_text(const std::optional<double>& v, int digits) { return v ? fixed(*v, digits) : "-"; }
inline std::string opt_csv(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace detail

/// Writes report.txt (aligned table), report.csv and one <label>_iwe.pgm
/// heatmap per row that carries an image.
inline void write_report(const std::vector<StreamMetrics>& rows, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::vector<std::string> head{"stream", "events", "kde_var", "low_frac", "entropy", "ods_f", "ods_thr", "spread_px"};
  std::vector<std::vector<std::string>> cells{head};
  for (const auto& r : rows) {
    cells.push_back({r.label, std::to_string(r.events), detail::fixed(r.kde_variance, 6),
                     detail::fixed(r.low_density_fraction, 4), detail::fixed(r.entropy, 4),
                     detail::opt_text(r.ods_f, 4), detail::opt_text(r.ods_threshold, 1),
                     detail::opt_text(r.edge_spread, 3)});
  }
  std::vector<std::size_t> widths(head.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ofstream txt(dir / "report.txt", std::ios::trunc);
  std::ofstream csv(dir / "report.csv", std::ios::trunc);
  if (!txt || !csv) fail(ErrorCode::IoError, "cannot create report files in " + dir.string());
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += "  ";
      line += c == 0 ? row[c] + std::string(widths[c] - row[c].size(), ' ')
                     : std::string(widths[c] - row[c].size(), ' ') + row[c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    txt << line << '\n';
  }
  csv << "stream,events,kde_variance,low_density_fraction,entropy_bits,ods_f,ods_threshold,edge_spread_px\n";
  for (const auto& r : rows) {
    csv << r.label << ',' << r.events << ',' << format_double(r.kde_variance) << ','
        << format_double(r.low_density_fraction) << ',' << format_double(r.entropy) << ','
        << detail::opt_csv(r.ods_f) << ',' << detail::opt_csv(r.ods_threshold) << ','
        << detail::opt_csv(r.edge_spread) << '\n';
    if (r.iwe) write_pgm(heatmap(*r.iwe), dir / (r.label + "_iwe.pgm"));
  }
  if (!txt || !csv) fail(ErrorCode::IoError, "cannot write report files in " + dir.string());
}

}  // namespace amiev
