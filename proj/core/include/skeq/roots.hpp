#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "skeq/errors.hpp"

namespace skeq {

struct RootResult {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
};

// Value and derivative of the objective at x.
using DifferentiableFn = std::function<std::pair<double, double>(double)>;

// Root of an increasing f on a bracket [lo, hi] with f(lo) <= 0 <= f(hi).
// Bisection keeps the bracket valid; a Newton step is taken whenever it lands
// inside the bracket. Terminates on |f| <= ftol or bracket width below
// xtol_abs + xtol_rel*|x|.
inline RootResult find_root_increasing(const DifferentiableFn& f, double lo,
                                       double hi, double ftol,
                                       double xtol_abs = 1e-15,
                                       double xtol_rel = 1e-15,
                                       int max_iter = 200) {
  auto [flo, dlo] = f(lo);
  if (flo == 0.0) return {lo, 0.0, 0};
  auto [fhi, dhi] = f(hi);
  if (fhi == 0.0) return {hi, 0.0, 0};
  if (flo > 0.0 || fhi < 0.0)
    throw ConvergenceError("root bracket invalid: f does not change sign");

  double x = 0.5 * (lo + hi);
  for (int it = 1; it <= max_iter; ++it) {
    auto [fx, dfx] = f(x);
    if (std::abs(fx) <= ftol) return {x, fx, it};
    if (fx < 0.0)
      lo = x;
    else
      hi = x;
    if (hi - lo <= xtol_abs + xtol_rel * std::abs(x)) return {x, fx, it};

    double next = hi;  // sentinel forcing bisection when Newton is unusable
    if (dfx > 0.0 && std::isfinite(dfx)) {
      double step = fx / dfx;
      double cand = x - step;
      if (cand > lo && cand < hi) next = cand;
    }
    if (next <= lo || next >= hi) next = 0.5 * (lo + hi);
    x = next;
  }
  auto [fx, dfx] = f(x);
  (void)dfx;
  if (std::abs(fx) <= ftol * 16.0) return {x, fx, max_iter};
  throw ConvergenceError("root solve exceeded iteration cap");
}

// Grows hi geometrically away from lo until f(hi) >= 0. Throws once the
// search passes the magnitude cap (the mu -> infinity regimes).
inline double expand_upper(const DifferentiableFn& f, double lo, double hi,
                           double cap = 1e12) {
  double width = std::max(hi - lo, 1e-8);
  while (f(hi).first < 0.0) {
    width *= 4.0;
    hi = lo + width;
    if (hi > cap)
      throw ConvergenceError("bracket expansion exceeded magnitude cap");
  }
  return hi;
}

// Shrinks lo geometrically below hi until f(lo) <= 0.
inline double expand_lower(const DifferentiableFn& f, double lo, double hi,
                           double cap = 1e12) {
  double width = std::max(hi - lo, 1e-8);
  while (f(lo).first > 0.0) {
    width *= 4.0;
    lo = hi - width;
    if (lo < -cap)
      throw ConvergenceError("bracket expansion exceeded magnitude cap");
  }
  return lo;
}

}  // namespace skeq
