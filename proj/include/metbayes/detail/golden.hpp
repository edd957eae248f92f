#pragma once

#include <cmath>
#include <limits>

namespace metbayes::detail {

/// Minimizes a unimodal f on [lo, hi] by golden-section search until the
/// bracket is narrower than rtol * |x| + atol.
template <class F>
double golden_section(F&& f, double lo, double hi, double rtol, double atol = 0.0,
                      int max_iter = 500) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo;
  double b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (a + b);
    if (b - a <= rtol * std::abs(mid) + atol) break;
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

/// Scans f on `points` evenly spaced nodes of [lo, hi], then refines the best
/// bracket with golden-section search. Robust to a poor initial bracket.
template <class F>
double bracketed_minimize(F&& f, double lo, double hi, int points, double rtol,
                          double atol = 0.0) {
  double best = std::numeric_limits<double>::infinity();
  int best_i = 0;
  const double step = (hi - lo) / (points - 1);
  for (int i = 0; i < points; ++i) {
    const double v = f(lo + step * i);
    if (v < best) {
      best = v;
      best_i = i;
    }
  }
  const double a = lo + step * (best_i > 0 ? best_i - 1 : 0);
  const double b = lo + step * (best_i < points - 1 ? best_i + 1 : points - 1);
  const double x = golden_section(f, a, b, rtol, atol);
  const double grid_x = lo + step * best_i;
  return f(x) <= best ? x : grid_x;
}

}  // namespace metbayes::detail
