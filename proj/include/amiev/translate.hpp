#pragma once

// Artificial-microsaccade event synthesis.
//
// Frames are turned into events with the log-intensity threshold model: each
// pixel keeps the log intensity of its last event and fires one event per
// contrast-threshold crossing, timestamped by linear interpolation between
// frames. With the prism on, pixel p at encoder angle theta sees the scene
// point imaged at p - d(p, theta) without the prism.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "amiev/error.hpp"
#include "amiev/events.hpp"
#include "amiev/frames.hpp"
#include "amiev/keyvalue.hpp"
#include "amiev/optics.hpp"
#include "amiev/parallel.hpp"
#include "amiev/params.hpp"

namespace amiev {

struct SynthConfig {
  double contrast_threshold = 0.2;  // log units
  PrismConfig prism{};
  CompensationParams params{};
  std::uint64_t refractory_us = 100;
  double log_eps = 1e-3;
  double theta0 = 0.0;  // encoder angle at t = 0
  // Largest prism-induced image motion per synthesis step, px.
  double max_step_px = 0.25;
  int threads = 1;

  void validate() const {
    if (!(contrast_threshold > 0.0)) fail(ErrorCode::InvalidArgument, "contrast threshold must be positive");
    if (!(log_eps > 0.0)) fail(ErrorCode::InvalidArgument, "log_eps must be positive");
    if (!(max_step_px > 0.0)) fail(ErrorCode::InvalidArgument, "max_step_px must be positive");
    prism.validate();
    params.validate();
  }

  /// Encoder angle at time t (microseconds), in [0, 2*pi).
  double theta_at(double t) const {
    const double turns = prism.rotation_speed * 1e-6 * t;
    return wrap_2pi(theta0 + kTwoPi * (turns - std::floor(turns)));
  }

  /// Keys: contrast_threshold, refractory_us, log_eps, prism_alpha_deg,
  /// prism_n, rotation_speed_hz, r_px, theta_b_deg, k1, center_x, center_y,
  /// theta0_deg, max_step_px. `width`/`height` set the default center.
  static SynthConfig from_config(const KeyValues& kv, int width, int height) {
    SynthConfig c;
    c.contrast_threshold = kv.get_double("contrast_threshold", c.contrast_threshold);
    const auto refractory = kv.get_int("refractory_us", static_cast<std::int64_t>(c.refractory_us));
    if (refractory < 0) fail(ErrorCode::InvalidArgument, "refractory_us must be >= 0");
    c.refractory_us = static_cast<std::uint64_t>(refractory);
    c.log_eps = kv.get_double("log_eps", c.log_eps);
    c.prism.alpha = deg2rad(kv.get_double("prism_alpha_deg", rad2deg(c.prism.alpha)));
    c.prism.n = kv.get_double("prism_n", c.prism.n);
    c.prism.rotation_speed = kv.get_double("rotation_speed_hz", c.prism.rotation_speed);
    c.params.r = kv.get_double("r_px", 25.0);
    c.params.theta_b = wrap_2pi(deg2rad(kv.get_double("theta_b_deg", 40.0)));
    c.params.center = {kv.get_double("center_x", 0.5 * (width - 1)), kv.get_double("center_y", 0.5 * (height - 1))};
    if (kv.has("k1")) c.params.k1 = kv.get_double("k1", 0.0);
    c.theta0 = wrap_2pi(deg2rad(kv.get_double("theta0_deg", 0.0)));
    c.max_step_px = kv.get_double("max_step_px", c.max_step_px);
    c.validate();
    return c;
  }
};

/// Attaches the configured encoder angle to every event.
inline EventStream attach_theta(const EventStream& stream, const SynthConfig& cfg) {
  std::vector<double> theta;
  theta.reserve(stream.size());
  for (const Event& e : stream.events()) theta.push_back(cfg.theta_at(static_cast<double>(e.t)));
  return EventStream(stream.resolution(), {stream.events().begin(), stream.events().end()}, std::move(theta));
}

/// Encoder log matching the configured rotation, sampled every `period_us`.
inline std::vector<EncoderSample> synth_encoder(const SynthConfig& cfg, std::uint64_t t0, std::uint64_t t1,
                                                std::uint64_t period_us = 100) {
  if (period_us == 0) fail(ErrorCode::InvalidArgument, "encoder period must be positive");
  std::vector<EncoderSample> out;
  for (std::uint64_t t = t0 - t0 % period_us;; t += period_us) {
    out.push_back({t, cfg.theta_at(static_cast<double>(t))});
    if (t >= t1) break;
  }
  return out;
}

namespace detail {

inline float sample_bilinear(const std::vector<float>& img, int w, int h, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = std::min(static_cast<int>(x), w - 2 < 0 ? 0 : w - 2);
  const int y0 = std::min(static_cast<int>(y), h - 2 < 0 ? 0 : h - 2);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const std::size_t row0 = static_cast<std::size_t>(y0) * w;
  const std::size_t row1 = static_cast<std::size_t>(y1) * w;
  const double top = img[row0 + x0] * (1.0 - fx) + img[row0 + x1] * fx;
  const double bot = img[row1 + x0] * (1.0 - fx) + img[row1 + x1] * fx;
  return static_cast<float>(top * (1.0 - fy) + bot * fy);
}

struct PixelState {
  double l_ref = 0.0;
  double l_prev = 0.0;
  float i_prev = 0.0f;
  std::uint64_t last_t = 0;
  bool fired = false;
};

// Crossings of log intensity between two samples (times in microseconds) at
// one pixel.
inline void emit_crossings(PixelState& s, float i_cur, double t_prev, double t_cur, std::uint16_t x,
                           std::uint16_t y, const SynthConfig& cfg, std::vector<Event>& out) {
  if (i_cur == s.i_prev) return;
  constexpr double kSlack = 1e-9;
  const double l_cur = std::log(static_cast<double>(i_cur) + cfg.log_eps);
  const double c = cfg.contrast_threshold;
  const double dl = l_cur - s.l_prev;
  while (std::abs(l_cur - s.l_ref) >= c - kSlack) {
    const int sign = l_cur > s.l_ref ? 1 : -1;
    s.l_ref += sign * c;
    const double frac = dl != 0.0 ? std::clamp((s.l_ref - s.l_prev) / dl, 0.0, 1.0) : 1.0;
    const auto t = static_cast<std::uint64_t>(std::llround(t_prev + frac * (t_cur - t_prev)));
    if (!s.fired || t - s.last_t >= cfg.refractory_us) {
      out.push_back({t, x, y, static_cast<std::int8_t>(sign)});
      s.last_t = t;
      s.fired = true;
    }
  }
  s.l_prev = l_cur;
  s.i_prev = i_cur;
}

template <typename Source>
double min_frame_interval_us(const Source& src) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < src.frame_count(); ++k) {
    m = std::min(m, static_cast<double>(src.time_us(k) - src.time_us(k - 1)));
  }
  return m;
}

}  // namespace detail

/// Events from a frame source. `Source` provides width(), height(),
/// frame_count(), time_us(k), frame(k) and motion_px_per_frame().
/// `Displacement` maps (pixel, encoder angle) to the prism displacement; see
/// CircleDisplacement and FullOpticsDisplacement.
///
/// With the prism on, each frame interval is split into sub-steps so that the
/// prism moves the image at most `cfg.max_step_px` per step. Displaced
/// positions are read from `src.intensity(t_us, point)` when the source
/// renders the scene itself; otherwise frames are sampled bilinearly and
/// blended linearly in time across the interval.
template <typename Source, typename Displacement>
EventStream synth_events_from_frames(const Source& src, const SynthConfig& cfg, bool prism_on,
                                     const Displacement& disp) {
  cfg.validate();
  const int w = src.width();
  const int h = src.height();
  const Resolution res{w, h};
  if (src.frame_count() == 0) return EventStream(res, {}, {});
  if (src.motion_px_per_frame() >= 1.0) {
    fail(ErrorCode::MotionTooFast, "scene moves " + std::to_string(src.motion_px_per_frame()) + " px per frame");
  }
  const double speed_px = kTwoPi * cfg.prism.rotation_speed * disp.max_radius() * 1e-6;  // px per us
  const double interval_us = detail::min_frame_interval_us(src);
  if (prism_on && std::isfinite(interval_us) && speed_px * interval_us >= 1.0) {
    fail(ErrorCode::PrismTooFast, "prism moves the image " + std::to_string(speed_px * interval_us) + " px per frame");
  }

  constexpr bool analytic = requires(const Source& s, double t, Point2 q) { s.intensity(t, q); };
  bool uniform = false;
  if constexpr (requires { disp.uniform(); }) uniform = disp.uniform();

  const std::size_t n_px = static_cast<std::size_t>(w) * h;
  std::vector<detail::PixelState> state(n_px);
  const int workers = std::max(1, std::min(cfg.threads, h));
  std::vector<std::vector<Event>> produced(static_cast<std::size_t>(workers));
  std::vector<float> prev_img;

  // Intensity seen by pixel p at time t (us); `prev`/`cur` are the frames
  // bracketing t and u the blend weight of `cur`.
  auto seen = [&](const Point2& p, double t, const Point2& shift, const std::vector<float>* prev,
                  const std::vector<float>& cur, double u) -> float {
    const Point2 q = p - shift;
    if constexpr (analytic) {
      (void)prev;
      (void)cur;
      (void)u;
      return static_cast<float>(src.intensity(t, q));
    } else {
      (void)t;
      const float b = detail::sample_bilinear(cur, w, h, q.x, q.y);
      if (!prev || u >= 1.0) return b;
      const float a = detail::sample_bilinear(*prev, w, h, q.x, q.y);
      return static_cast<float>((1.0 - u) * a + u * b);
    }
  };

  auto step = [&](const std::vector<float>* prev, const std::vector<float>& cur, double t0, double t1, double u,
                  bool init) {
    const double theta = cfg.theta_at(t1);
    const Point2 shift0 = prism_on && uniform ? disp(Point2{}, theta) : Point2{};
    parallel_for(static_cast<std::size_t>(h), workers, [&](std::size_t y0, std::size_t y1, std::size_t c) {
      for (std::size_t y = y0; y < y1; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t i = y * w + x;
          float v;
          if (!prism_on) {
            v = cur[i];
          } else {
            const Point2 p{static_cast<double>(x), static_cast<double>(y)};
            v = seen(p, t1, uniform ? shift0 : disp(p, theta), prev, cur, u);
          }
          if (init) {
            state[i].i_prev = v;
            state[i].l_ref = state[i].l_prev = std::log(static_cast<double>(v) + cfg.log_eps);
          } else {
            detail::emit_crossings(state[i], v, t0, t1, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                                   cfg, produced[c]);
          }
        }
      }
    });
  };

  {
    const std::vector<float>& first = src.frame(0);
    if (first.size() != n_px) fail(ErrorCode::DimensionMismatch, "frame size does not match the sequence");
    const double t = static_cast<double>(src.time_us(0));
    step(nullptr, first, t, t, 1.0, true);
    if (!analytic && prism_on) prev_img = first;
  }
  for (std::size_t k = 1; k < src.frame_count(); ++k) {
    const std::vector<float>& cur = src.frame(k);
    if (cur.size() != n_px) fail(ErrorCode::DimensionMismatch, "frame size does not match the sequence");
    const double t_prev = static_cast<double>(src.time_us(k - 1));
    const double t_cur = static_cast<double>(src.time_us(k));
    const int sub = prism_on ? std::max(1, static_cast<int>(std::ceil(speed_px * (t_cur - t_prev) / cfg.max_step_px)))
                             : 1;
    for (int j = 1; j <= sub; ++j) {
      const double a = t_prev + (t_cur - t_prev) * (j - 1) / sub;
      const double b = j == sub ? t_cur : t_prev + (t_cur - t_prev) * j / sub;
      step(prev_img.empty() ? nullptr : &prev_img, cur, a, b, static_cast<double>(j) / sub, false);
    }
    if (!analytic && prism_on) prev_img = cur;
  }

  std::vector<Event> events;
  std::size_t total = 0;
  for (const auto& p : produced) total += p.size();
  events.reserve(total);
  for (auto& p : produced) {
    events.insert(events.end(), p.begin(), p.end());
    std::vector<Event>().swap(p);
  }
  std::sort(events.begin(), events.end(), event_less);
  const EventStream out(res, std::move(events));
  return prism_on ? attach_theta(out, cfg) : out;
}

template <typename Source>
EventStream synth_events_from_frames(const Source& src, const SynthConfig& cfg, bool prism_on) {
  return synth_events_from_frames(src, cfg, prism_on, CircleDisplacement(cfg.params));
}

/// Shifts every event forward by the prism displacement at its time and
/// rounds to the nearest pixel. Events pushed off the sensor are dropped.
/// Only existing events move: edges the source camera never saw stay
/// invisible.
inline EventStream synth_ami_from_events(const EventStream& stream, const SynthConfig& cfg) {
  cfg.validate();
  std::vector<Event> events;
  events.reserve(stream.size());
  for (const Event& e : stream.events()) {
    const Point2 p{static_cast<double>(e.x), static_cast<double>(e.y)};
    const Point2 q = p + pixel_displacement(p, cfg.theta_at(static_cast<double>(e.t)), cfg.params);
    const double x = std::floor(q.x + 0.5);
    const double y = std::floor(q.y + 0.5);
    if (x < 0 || y < 0 || x >= stream.width() || y >= stream.height()) continue;
    events.push_back({e.t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), e.polarity});
  }
  std::sort(events.begin(), events.end(), event_less);
  return attach_theta(EventStream(stream.resolution(), std::move(events)), cfg);
}

/// Union of the frame-driven and event-driven paths. An event from one path
/// is dropped when the other path already fired at the same pixel within
/// the refractory period.
template <typename Source>
EventStream synth_ami_from_frames_plus_events(const Source& src, const EventStream& stream, const SynthConfig& cfg) {
  if (src.frame_count() == 0) return synth_ami_from_events(stream, cfg);
  if (stream.empty()) return synth_events_from_frames(src, cfg, true);
  if (src.width() != stream.width() || src.height() != stream.height()) {
    fail(ErrorCode::ResolutionMismatch, "frames and events have different resolutions");
  }
  const std::uint64_t f0 = src.time_us(0);
  const std::uint64_t f1 = src.time_us(src.frame_count() - 1);
  if (stream.t_end() < f0 || stream.t_begin() > f1) {
    fail(ErrorCode::TimeRangeMismatch, "frames and events do not overlap in time");
  }
  const EventStream a = synth_events_from_frames(src, cfg, true);
  const EventStream b = synth_ami_from_events(stream, cfg);

  struct Last {
    std::uint64_t t = 0;
    int source = -1;
  };
  std::vector<Last> last(static_cast<std::size_t>(stream.width()) * stream.height());
  std::vector<Event> events;
  events.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    const bool take_a = j == b.size() || (i < a.size() && !event_less(b[j], a[i]));
    const Event& e = take_a ? a[i++] : b[j++];
    const int source = take_a ? 0 : 1;
    Last& l = last[static_cast<std::size_t>(e.y) * stream.width() + e.x];
    if (l.source >= 0 && l.source != source && e.t - l.t < cfg.refractory_us) continue;
    l = {e.t, source};
    events.push_back(e);
  }
  return attach_theta(EventStream(stream.resolution(), std::move(events)), cfg);
}

/// Adds round(fraction * size) events uniformly distributed over the sensor
/// and the stream's time span, with random polarity. The result carries no
/// angles; re-attach them with sync_theta or attach_theta.
inline EventStream inject_noise(const EventStream& stream, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0)) fail(ErrorCode::InvalidArgument, "noise fraction must be >= 0");
  if (stream.empty()) return stream.without_theta();
  std::mt19937_64 rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(stream.size())));
  std::vector<Event> events(stream.events().begin(), stream.events().end());
  events.reserve(events.size() + n);
  std::uniform_int_distribution<std::uint64_t> t_dist(stream.t_begin(), stream.t_end());
  std::uniform_int_distribution<int> x_dist(0, stream.width() - 1);
  std::uniform_int_distribution<int> y_dist(0, stream.height() - 1);
  std::uniform_int_distribution<int> p_dist(0, 1);
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint64_t t = t_dist(rng);
    const auto x = static_cast<std::uint16_t>(x_dist(rng));
    const auto y = static_cast<std::uint16_t>(y_dist(rng));
    events.push_back({t, x, y, static_cast<std::int8_t>(p_dist(rng) ? 1 : -1)});
  }
  std::sort(events.begin(), events.end(), event_less);
  return EventStream(stream.resolution(), std::move(events));
}

}  // namespace amiev
