#pragma once

#include <cmath>

namespace amiev {

struct LineMinimum {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

/// Golden-section minimization of `f` over [a, b], stopping once the
/// bracket is narrower than `tol`. Returns the best point evaluated.
template <typename F>
LineMinimum golden_section_minimize(F&& f, double a, double b, double tol, int max_iter = 200) {
  constexpr double kInvPhi = 0.6180339887498949;
  LineMinimum best{a, 0.0, 0};
  bool have = false;
  auto eval = [&](double x) {
    const double v = f(x);
    ++best.evaluations;
    if (!have || v < best.value) {
      best.x = x;
      best.value = v;
      have = true;
    }
    return v;
  };
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  for (int i = 0; i < max_iter && std::abs(b - a) > tol; ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = eval(d);
    }
  }
  return best;
}

}  // namespace amiev
