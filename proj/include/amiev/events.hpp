#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "amiev/error.hpp"
#include "amiev/params.hpp"

namespace amiev {

/// A single brightness-change spike. `t` is in microseconds.
struct Event {
  std::uint64_t t = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t polarity = 1;  // +1 or -1

  friend bool operator==(const Event&, const Event&) = default;
};

/// Canonical stream order: time, then row, column and polarity.
inline bool event_less(const Event& a, const Event& b) {
  return std::tie(a.t, a.y, a.x, a.polarity) < std::tie(b.t, b.y, b.x, b.polarity);
}

struct EncoderSample {
  std::uint64_t t = 0;
  double theta = 0.0;  // radians, [0, 2*pi)
};

struct Resolution {
  int width = 0;
  int height = 0;
  friend bool operator==(const Resolution&, const Resolution&) = default;
};

/// Time-ordered events on a sensor, optionally carrying the prism angle of
/// every event.
class EventStream {
 public:
  EventStream() = default;
  EventStream(Resolution res, std::vector<Event> events, std::vector<double> theta = {})
      : res_(res), events_(std::move(events)), theta_(std::move(theta)) {
    validate();
  }

  Resolution resolution() const { return res_; }
  int width() const { return res_.width; }
  int height() const { return res_.height; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

  std::span<const Event> events() const { return events_; }
  const Event& operator[](std::size_t i) const { return events_[i]; }

  bool has_theta() const { return !events_.empty() && theta_.size() == events_.size(); }
  std::span<const double> theta() const { return theta_; }

  std::uint64_t t_begin() const { return events_.empty() ? 0 : events_.front().t; }
  std::uint64_t t_end() const { return events_.empty() ? 0 : events_.back().t; }
  double duration_s() const { return 1e-6 * static_cast<double>(t_end() - t_begin()); }

  /// Copy without per-event angles.
  EventStream without_theta() const { return EventStream(res_, events_); }

  void validate() const {
    if (res_.width <= 0 || res_.height <= 0 || res_.width > 65536 || res_.height > 65536) {
      fail(ErrorCode::InvalidArgument, "invalid stream resolution");
    }
    if (!theta_.empty() && theta_.size() != events_.size()) {
      fail(ErrorCode::InvalidArgument, "theta count does not match event count");
    }
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const Event& e = events_[i];
      if (e.x >= res_.width || e.y >= res_.height) {
        fail(ErrorCode::ResolutionMismatch, "event " + std::to_string(i) + " lies outside the sensor");
      }
      if (e.polarity != 1 && e.polarity != -1) {
        fail(ErrorCode::InvalidArgument, "event " + std::to_string(i) + " has invalid polarity");
      }
      if (i > 0 && event_less(e, events_[i - 1])) {
        fail(ErrorCode::InvalidArgument, "events are not sorted");
      }
    }
  }

 private:
  Resolution res_{};
  std::vector<Event> events_;
  std::vector<double> theta_;
};

/// Sorts events (and their angles, when present) into canonical order.
/// Returns the number of events that were out of place in the input.
inline std::size_t sort_events(std::vector<Event>& events, std::vector<double>* theta = nullptr) {
  std::size_t out_of_order = 0;
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (event_less(events[i], events[i - 1])) ++out_of_order;
  }
  if (out_of_order == 0) return 0;
  if (theta && theta->size() == events.size()) {
    std::vector<std::size_t> idx(events.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return event_less(events[a], events[b]); });
    std::vector<Event> ev(events.size());
    std::vector<double> th(events.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      ev[i] = events[idx[i]];
      th[i] = (*theta)[idx[i]];
    }
    events.swap(ev);
    theta->swap(th);
  } else {
    std::stable_sort(events.begin(), events.end(), event_less);
  }
  return out_of_order;
}

/// Event after warping: sub-pixel position, angle removed.
struct WarpedEvent {
  std::uint64_t t = 0;
  double x = 0.0;
  double y = 0.0;
  std::int8_t polarity = 1;
};

struct WarpedStream {
  Resolution resolution{};
  std::vector<WarpedEvent> events;

  std::size_t size() const { return events.size(); }
};

/// Attaches a prism angle to every event by linear interpolation of the
/// unwrapped encoder angle. Consecutive encoder samples are unwrapped along
/// the shorter arc, so the encoder must sample faster than half a turn.
inline EventStream sync_theta(const EventStream& stream, std::span<const EncoderSample> encoder) {
  if (encoder.empty()) fail(ErrorCode::OutOfRange, "no encoder samples");
  for (std::size_t i = 1; i < encoder.size(); ++i) {
    if (encoder[i].t <= encoder[i - 1].t) {
      fail(ErrorCode::InvalidArgument, "encoder samples must be strictly increasing in time");
    }
  }
  std::vector<double> theta(stream.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const std::uint64_t t = stream[i].t;
    if (t < encoder.front().t || t > encoder.back().t) {
      fail(ErrorCode::OutOfRange,
           "event at t=" + std::to_string(t) + " us lies outside the encoder coverage");
    }
    while (k + 1 < encoder.size() && encoder[k + 1].t <= t) ++k;
    if (encoder[k].t == t) {
      theta[i] = encoder[k].theta;
      continue;
    }
    const EncoderSample& a = encoder[k];
    const EncoderSample& b = encoder[k + 1];
    const double frac = static_cast<double>(t - a.t) / static_cast<double>(b.t - a.t);
    theta[i] = wrap_2pi(a.theta + frac * wrap_pi(b.theta - a.theta));
  }
  return EventStream(stream.resolution(), {stream.events().begin(), stream.events().end()},
                     std::move(theta));
}

/// Events with t0 <= t < t1.
inline EventStream slice(const EventStream& stream, std::uint64_t t0, std::uint64_t t1) {
  const auto ev = stream.events();
  const auto lo = std::lower_bound(ev.begin(), ev.end(), t0,
                                   [](const Event& e, std::uint64_t t) { return e.t < t; });
  const auto hi = std::lower_bound(lo, ev.end(), t1,
                                   [](const Event& e, std::uint64_t t) { return e.t < t; });
  std::vector<double> theta;
  if (stream.has_theta()) {
    const auto th = stream.theta();
    theta.assign(th.begin() + (lo - ev.begin()), th.begin() + (hi - ev.begin()));
  }
  return EventStream(stream.resolution(), {lo, hi}, std::move(theta));
}

/// Events whose angle lies in the half-open arc [theta0, theta1), walking
/// counter-clockwise from theta0; the arc may cross 0.
inline EventStream slice_by_theta(const EventStream& stream, double theta0, double theta1) {
  if (!stream.has_theta()) fail(ErrorCode::MissingTheta, "stream carries no prism angles");
  const double a = wrap_2pi(theta0);
  const double b = wrap_2pi(theta1);
  std::vector<Event> ev;
  std::vector<double> th;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const double t = stream.theta()[i];
    const bool inside = a <= b ? (t >= a && t < b) : (t >= a || t < b);
    if (inside) {
      ev.push_back(stream[i]);
      th.push_back(t);
    }
  }
  return EventStream(stream.resolution(), std::move(ev), std::move(th));
}

/// Merges two sorted streams of the same resolution.
inline EventStream merge(const EventStream& a, const EventStream& b) {
  if (a.resolution() != b.resolution()) fail(ErrorCode::ResolutionMismatch, "cannot merge streams");
  const bool with_theta = (a.has_theta() || a.empty()) && (b.has_theta() || b.empty()) &&
                          !(a.empty() && b.empty());
  std::vector<Event> ev;
  std::vector<double> th;
  ev.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    const bool take_a = j == b.size() || (i < a.size() && !event_less(b[j], a[i]));
    if (take_a) {
      ev.push_back(a[i]);
      if (with_theta) th.push_back(a.theta()[i]);
      ++i;
    } else {
      ev.push_back(b[j]);
      if (with_theta) th.push_back(b.theta()[j]);
      ++j;
    }
  }
  return EventStream(a.resolution(), std::move(ev), std::move(th));
}

/// Constant-speed encoder log: samples every `period_us` from t0 through at
/// least t1, angle = theta0 + 2*pi*speed*t.
inline std::vector<EncoderSample> constant_speed_encoder(std::uint64_t t0, std::uint64_t t1,
                                                         double speed_rps, std::uint64_t period_us,
                                                         double theta0 = 0.0) {
  if (period_us == 0) fail(ErrorCode::InvalidArgument, "encoder period must be positive");
  std::vector<EncoderSample> out;
  const std::uint64_t first = t0 - t0 % period_us;
  for (std::uint64_t t = first;; t += period_us) {
    out.push_back({t, wrap_2pi(theta0 + kTwoPi * speed_rps * 1e-6 * static_cast<double>(t))});
    if (t >= t1) break;
  }
  return out;
}

}  // namespace amiev
