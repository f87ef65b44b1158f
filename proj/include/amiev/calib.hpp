#pragma once

// Rotation compensation and calibration of the circle displacement model.
//
// A warped event is moved back to the reference phase theta_0 = 0:
//   p' = p - (d(theta) - d(0)),  d(theta) = r * (cos(theta + theta_b), sin(theta + theta_b)).
// Calibration minimizes the sharpness cost of the image of warped events,
//   J = sum over pixels with h > 0 of 1 / (1 + exp(h / eta)),
// by a coarse grid over (r, theta_b) followed by alternating golden-section
// refinement of each coordinate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amiev/error.hpp"
#include "amiev/events.hpp"
#include "amiev/geometry.hpp"
#include "amiev/golden.hpp"
#include "amiev/iwe.hpp"
#include "amiev/keyvalue.hpp"
#include "amiev/optics.hpp"
#include "amiev/parallel.hpp"
#include "amiev/params.hpp"

namespace amiev {

inline constexpr double kReferencePhase = 0.0;

inline WarpedEvent warp_event(const Event& e, double theta, const CompensationParams& params) {
  const Point2 p{static_cast<double>(e.x), static_cast<double>(e.y)};
  const Point2 shift = pixel_displacement(p, theta, params) - pixel_displacement(p, kReferencePhase, params);
  return {e.t, p.x - shift.x, p.y - shift.y, e.polarity};
}

inline WarpedStream compensate_stream(const EventStream& stream, const CompensationParams& params) {
  WarpedStream out{stream.resolution(), {}};
  if (stream.empty()) return out;
  if (!stream.has_theta()) fail(ErrorCode::MissingTheta, "stream carries no prism angles");
  out.events.reserve(stream.size());
  const auto theta = stream.theta();
  for (std::size_t i = 0; i < stream.size(); ++i) out.events.push_back(warp_event(stream[i], theta[i], params));
  return out;
}

/// Identity warp: events at their recorded pixel.
inline WarpedStream uncompensated(const EventStream& stream) {
  WarpedStream out{stream.resolution(), {}};
  out.events.reserve(stream.size());
  for (const Event& e : stream.events()) out.events.push_back({e.t, double(e.x), double(e.y), e.polarity});
  return out;
}

inline double sharpness_cost(const IWE& iwe, double eta) {
  if (!(eta > 0.0)) fail(ErrorCode::InvalidArgument, "eta must be positive");
  double j = 0.0;
  for (double h : iwe.counts) {
    if (h > 0.0) j += 1.0 / (1.0 + std::exp(h / eta));
  }
  return j;
}

/// Count of the pixel holding the median unit of mass: half of the total
/// count sits in pixels with at most this count.
inline double mass_median(const IWE& iwe) {
  std::vector<double> pos;
  double total = 0.0;
  for (double h : iwe.counts) {
    if (h > 0.0) {
      pos.push_back(h);
      total += h;
    }
  }
  if (pos.empty()) return 1.0;
  std::sort(pos.begin(), pos.end());
  double acc = 0.0;
  for (double h : pos) {
    acc += h;
    if (acc >= 0.5 * total) return h;
  }
  return pos.back();
}

/// Median of the positive entries.
inline double median_positive(const IWE& iwe) {
  std::vector<double> pos;
  for (double h : iwe.counts) {
    if (h > 0.0) pos.push_back(h);
  }
  if (pos.empty()) return 1.0;
  const auto mid = pos.begin() + static_cast<std::ptrdiff_t>(pos.size() / 2);
  std::nth_element(pos.begin(), mid, pos.end());
  if (pos.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(pos.begin(), mid);
  return 0.5 * (lower + upper);
}

// How the default cost scale is read off an image: median_positive or
// mass_median. The mass median ignores sparse noise pixels.
enum class EtaRule { MedianPositive, MassMedian };

struct SearchConfig {
  // Coarse radius range; unset bounds default to [0.5, 1.5] x initial radius.
  std::optional<double> r_min;
  std::optional<double> r_max;
  double r_step = 1.0;
  double theta_step = deg2rad(5.0);
  // Refinement stops once a full round moves less than these.
  double r_tol = 0.05;
  double theta_tol = deg2rad(0.1);
  int max_iterations = 100;
  double window_s = 2.0;
  // Cost scale. Unset: `eta_rule` applied to the uncompensated image seeds a
  // first grid pass, then the grid is rerun with the rule applied to the
  // image at that pass's best cell.
  std::optional<double> eta;
  EtaRule eta_rule = EtaRule::MassMedian;
  Binning binning = Binning::Bilinear;
  // Deterministic stride subsampling above this many events; unset means one
  // event per two pixels. Uniform noise fills a dense image and flattens J.
  std::optional<std::size_t> max_events;
  std::size_t min_events = 500;
  double min_turns = 2.0;
  int threads = 1;

  void validate() const {
    if (!(window_s > 0.0)) fail(ErrorCode::InvalidArgument, "window length must be positive");
    if (!(r_step > 0.0 && theta_step > 0.0)) fail(ErrorCode::InvalidArgument, "grid steps must be positive");
    if (r_min && r_max && !(*r_min <= *r_max)) fail(ErrorCode::InvalidArgument, "empty radius range");
    if (eta && !(*eta > 0.0)) fail(ErrorCode::InvalidArgument, "eta must be positive");
    if (max_iterations < 1) fail(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
  }
};

struct CostSample {
  double r = 0.0;
  double theta_b = 0.0;
  double cost = 0.0;
};

struct CostReport {
  double cost = 0.0;               // J at the returned parameters
  double cost_uncompensated = 0.0;  // J of the raw window
  double eta = 1.0;
  std::vector<CostSample> samples;  // coarse grid, r-major
  int iterations = 0;               // refinement rounds
  std::size_t events_used = 0;
};

/// Evaluates J(r, theta_b) on a fixed set of events. Thread-safe: each call
/// accumulates into its own image.
class SharpnessObjective {
 public:
  SharpnessObjective(const EventStream& stream, const CompensationParams& base, Binning binning,
                     std::size_t max_events)
      : res_(stream.resolution()), binning_(binning) {
    if (!stream.has_theta()) fail(ErrorCode::MissingTheta, "stream carries no prism angles");
    const std::size_t n = stream.size();
    const std::size_t m = (max_events > 0 && n > max_events) ? max_events : n;
    x_.reserve(m);
    y_.reserve(m);
    dc_.reserve(m);
    ds_.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = m == n ? k : (k * n) / m;
      const Event& e = stream[i];
      const double th = stream.theta()[i];
      const Point2 p{double(e.x), double(e.y)};
      const double scale = base.r > 0.0 ? base.radius_at(p) / base.r : 1.0;
      x_.push_back(p.x);
      y_.push_back(p.y);
      // Unit-radius displacement relative to the reference phase, split into
      // the parts multiplying cos(theta_b) and sin(theta_b).
      dc_.push_back(scale * (std::cos(th) - std::cos(kReferencePhase)));
      ds_.push_back(scale * (std::sin(th) - std::sin(kReferencePhase)));
    }
  }

  std::size_t size() const { return x_.size(); }

  IWE image(double r, double theta_b) const {
    IWE iwe(res_.width, res_.height);
    const double cb = std::cos(theta_b);
    const double sb = std::sin(theta_b);
    for (std::size_t i = 0; i < x_.size(); ++i) {
      // cos(th + b) - cos(b) = (cos th - 1) cos b - sin th sin b, etc.
      const double sx = r * (dc_[i] * cb - ds_[i] * sb);
      const double sy = r * (ds_[i] * cb + dc_[i] * sb);
      splat(iwe, x_[i] - sx, y_[i] - sy, binning_);
    }
    return iwe;
  }

  double operator()(double r, double theta_b, double eta) const { return sharpness_cost(image(r, theta_b), eta); }

 private:
  Resolution res_;
  Binning binning_;
  std::vector<double> x_, y_, dc_, ds_;
};

/// Total rotation covered by the per-event angles, in turns.
inline double turns_covered(const EventStream& stream) {
  if (!stream.has_theta()) return 0.0;
  double total = 0.0;
  const auto th = stream.theta();
  for (std::size_t i = 1; i < th.size(); ++i) total += wrap_pi(th[i] - th[i - 1]);
  return std::abs(total) / kTwoPi;
}

struct Calibration {
  CompensationParams params;
  CostReport report;
};

inline Calibration calibrate(const EventStream& stream, const CompensationParams& init, const SearchConfig& cfg) {
  cfg.validate();
  if (!stream.empty() && !stream.has_theta()) fail(ErrorCode::MissingTheta, "stream carries no prism angles");
  const auto window_end = stream.t_begin() + static_cast<std::uint64_t>(std::llround(cfg.window_s * 1e6));
  const EventStream window = stream.empty() ? stream : slice(stream, stream.t_begin(), window_end);
  if (window.size() < cfg.min_events) {
    fail(ErrorCode::InsufficientData, "calibration window holds " + std::to_string(window.size()) +
                                          " events, need " + std::to_string(cfg.min_events));
  }
  const double turns = turns_covered(window);
  if (turns < cfg.min_turns) {
    fail(ErrorCode::InsufficientData,
         "calibration window covers " + std::to_string(turns) + " rotations, need " + std::to_string(cfg.min_turns));
  }

  const std::size_t pixels = static_cast<std::size_t>(window.width()) * window.height();
  const SharpnessObjective objective(window, init, cfg.binning, cfg.max_events.value_or(std::max<std::size_t>(1, pixels / 2)));
  CostReport report;
  report.events_used = objective.size();
  auto scale_of = [&](const IWE& iwe) {
    return cfg.eta_rule == EtaRule::MassMedian ? mass_median(iwe) : median_positive(iwe);
  };
  double eta = cfg.eta ? *cfg.eta : scale_of(objective.image(0.0, 0.0));
  report.cost_uncompensated = objective(0.0, 0.0, eta);

  const double r_lo = std::max(0.0, cfg.r_min.value_or(0.5 * init.r));
  const double r_hi = std::max(r_lo, cfg.r_max.value_or(1.5 * init.r));
  std::vector<double> rs;
  for (int i = 0;; ++i) {
    const double r = r_lo + i * cfg.r_step;
    if (r > r_hi + 1e-9) break;
    rs.push_back(r);
  }
  std::vector<double> thetas;
  for (int i = 0;; ++i) {
    const double t = i * cfg.theta_step;
    if (t >= kTwoPi - 1e-12) break;
    thetas.push_back(t);
  }
  report.samples.resize(rs.size() * thetas.size());
  auto grid = [&]() {
    for (std::size_t i = 0; i < rs.size(); ++i) {
      for (std::size_t j = 0; j < thetas.size(); ++j) report.samples[i * thetas.size() + j] = {rs[i], thetas[j], 0.0};
    }
    parallel_for(report.samples.size(), cfg.threads, [&](std::size_t b, std::size_t e, std::size_t) {
      for (std::size_t k = b; k < e; ++k) {
        report.samples[k].cost = objective(report.samples[k].r, report.samples[k].theta_b, eta);
      }
    });
    // Strict comparison in r-major order breaks ties towards the smallest r,
    // then the smallest theta_b.
    CostSample best = report.samples.front();
    for (const auto& s : report.samples) {
      if (s.cost < best.cost) best = s;
    }
    return best;
  };
  CostSample best = grid();
  if (!cfg.eta) {
    const double sharper = scale_of(objective.image(best.r, best.theta_b));
    if (sharper > 0.0 && sharper != eta) {
      eta = sharper;
      report.cost_uncompensated = objective(0.0, 0.0, eta);
      best = grid();
    }
  }
  report.eta = eta;

  double r = best.r;
  double theta = best.theta_b;
  double cost = best.cost;
  bool converged = false;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    report.iterations = it + 1;
    const double r_prev = r;
    const double theta_prev = theta;

    const double lo = std::max(0.0, r - cfg.r_step);
    const auto rm = golden_section_minimize([&](double x) { return objective(x, theta, eta); }, lo,
                                            r + cfg.r_step, 0.2 * cfg.r_tol);
    if (rm.value < cost) {
      r = rm.x;
      cost = rm.value;
    }
    const auto tm = golden_section_minimize([&](double x) { return objective(r, x, eta); },
                                            theta - cfg.theta_step, theta + cfg.theta_step, 0.2 * cfg.theta_tol);
    if (tm.value < cost) {
      theta = tm.x;
      cost = tm.value;
    }
    if (std::abs(r - r_prev) < cfg.r_tol && std::abs(wrap_pi(theta - theta_prev)) < cfg.theta_tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    fail(ErrorCode::NonConvergence, "refinement did not settle within " + std::to_string(cfg.max_iterations) + " rounds");
  }

  Calibration out;
  out.params = init;
  out.params.r = r;
  out.params.theta_b = wrap_2pi(theta);
  report.cost = cost;
  out.report = std::move(report);
  return out;
}

/// Standard deviation of the signed distance from each event to its nearest
/// ground-truth edge. Events farther than `max_distance` are ignored.
inline double compensation_error(const WarpedStream& stream, const EdgeGeometry& edges,
                                 double max_distance = std::numeric_limits<double>::infinity()) {
  if (edges.empty()) fail(ErrorCode::NoEdges, "no ground-truth edges given");
  double sum = 0.0;
  double sum2 = 0.0;
  std::size_t n = 0;
  for (const auto& e : stream.events) {
    const double d = nearest_edge_distance({e.x, e.y}, edges);
    if (std::abs(d) > max_distance) continue;
    sum += d;
    sum2 += d * d;
    ++n;
  }
  if (n == 0) fail(ErrorCode::EmptyStream, "no events near the edges");
  const double mean = sum / n;
  return std::sqrt(std::max(0.0, sum2 / n - mean * mean));
}

/// Ground-truth edges as they appear after compensation: scene edges shifted
/// by the reference-phase displacement.
inline EdgeGeometry compensated_edges(const EdgeGeometry& scene_edges, const CompensationParams& params,
                                      const Point2& at) {
  return scene_edges.translated(pixel_displacement(at, kReferencePhase, params));
}

struct SharpnessComparison {
  double eta = 1.0;
  double compensated = 0.0;
  double uncompensated = 0.0;
};

/// J of every event in `stream`, warped with `params` and unwarped. Unset
/// `eta` means the median positive count of the unwarped image.
inline SharpnessComparison compare_sharpness(const EventStream& stream, const CompensationParams& params,
                                             std::optional<double> eta = std::nullopt,
                                             Binning binning = Binning::Bilinear) {
  const SharpnessObjective objective(stream, params, binning, 0);
  SharpnessComparison c;
  c.eta = eta ? *eta : median_positive(objective.image(0.0, 0.0));
  c.compensated = objective(params.r, params.theta_b, c.eta);
  c.uncompensated = objective(0.0, 0.0, c.eta);
  return c;
}

struct CalibrationFile {
  CompensationParams params;
  double cost = 0.0;
  double window_s = 0.0;
};

inline void write_calibration(const CalibrationFile& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot create " + path.string());
  out << "r_px = " << format_double(c.params.r) << '\n'
      << "theta_b_rad = " << format_double(c.params.theta_b) << '\n'
      << "center_x = " << format_double(c.params.center.x) << '\n'
      << "center_y = " << format_double(c.params.center.y) << '\n'
      << "k1 = " << format_double(c.params.k1.value_or(0.0)) << '\n'
      << "cost = " << format_double(c.cost) << '\n'
      << "window_s = " << format_double(c.window_s) << '\n';
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
}

inline CalibrationFile read_calibration(const std::filesystem::path& path) {
  const KeyValues kv = KeyValues::load(path);
  CalibrationFile c;
  c.params.r = kv.require_double("r_px");
  c.params.theta_b = kv.require_double("theta_b_rad");
  c.params.center = {kv.require_double("center_x"), kv.require_double("center_y")};
  const double k1 = kv.get_double("k1", 0.0);
  if (k1 != 0.0) c.params.k1 = k1;
  c.cost = kv.get_double("cost", 0.0);
  c.window_s = kv.get_double("window_s", 0.0);
  c.params.validate();
  return c;
}

}  // namespace amiev
