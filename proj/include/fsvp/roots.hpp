#pragma once

/**
 * @file roots.hpp
 * @brief Scalar root finding: Pegasus (modified regula falsi) on a bracket and
 * a safeguarded secant that falls back to bracket expansion plus Pegasus.
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <string>

#include "fsvp/errors.hpp"

namespace fsvp {

struct RootResult {
  double x = 0.0;
  double fx = 0.0;
  int evaluations = 0;
};

/// Pegasus iteration on [a, b] with fa * fb < 0. Stops when |f(x)| <= tol.
template <typename Fn>
RootResult pegasus(Fn&& fn, double a, double fa, double b, double fb, double tol, int max_iter) {
  if (fa * fb > 0.0) throw SolverError("pegasus: interval does not bracket a root", std::min(std::abs(fa), std::abs(fb)));
  RootResult best{std::abs(fa) < std::abs(fb) ? a : b, std::abs(fa) < std::abs(fb) ? fa : fb, 0};
  if (std::abs(best.fx) <= tol) return best;
  for (int it = 0; it < max_iter; ++it) {
    const double x = b - fb * (b - a) / (fb - fa);
    const double fx = fn(x);
    ++best.evaluations;
    if (std::abs(fx) < std::abs(best.fx)) {
      best.x = x;
      best.fx = fx;
    }
    if (std::abs(fx) <= tol || x == a || x == b) {
      best.x = x;
      best.fx = fx;
      return best;
    }
    if (fx * fb < 0.0) {
      a = b;
      fa = fb;
    } else {
      fa *= fb / (fb + fx);
    }
    b = x;
    fb = fx;
  }
  throw SolverError("pegasus: no convergence", std::abs(best.fx));
}

/// Root of fn near x0. Secant iterations first; if they stall, a bracket is
/// grown geometrically around the best point and Pegasus finishes the job.
/// `step` is the initial secant offset and the seed for the bracket search.
template <typename Fn>
RootResult solve_scalar(Fn&& fn, double x0, double step, double tol, int max_iter = 60) {
  RootResult res;
  double xa = x0, fa = fn(xa);
  ++res.evaluations;
  if (std::abs(fa) <= tol) return {xa, fa, res.evaluations};
  double xb = x0 + step, fb = fn(xb);
  ++res.evaluations;

  std::optional<std::pair<double, double>> lo, hi;  // (x, f) with f < 0 / f > 0
  auto record = [&](double x, double f) {
    if (f < 0.0) {
      if (!lo || std::abs(f) < std::abs(lo->second)) lo = {x, f};
    } else if (f > 0.0) {
      if (!hi || std::abs(f) < std::abs(hi->second)) hi = {x, f};
    }
  };
  record(xa, fa);
  record(xb, fb);

  for (int it = 0; it < 12; ++it) {
    if (std::abs(fb) <= tol) return {xb, fb, res.evaluations};
    if (fb == fa) break;
    double xn = xb - fb * (xb - xa) / (fb - fa);
    const double limit = 10.0 * std::abs(xb - xa) + std::abs(step);
    if (!std::isfinite(xn)) break;
    if (std::abs(xn - xb) > limit) xn = xb + std::copysign(limit, xn - xb);
    xa = xb;
    fa = fb;
    xb = xn;
    fb = fn(xb);
    ++res.evaluations;
    record(xb, fb);
  }
  if (std::abs(fb) <= tol) return {xb, fb, res.evaluations};

  // Bracket search.
  double width = std::abs(step);
  for (int it = 0; !(lo && hi) && it < 60; ++it) {
    const double center = lo ? lo->first : hi->first;
    for (double sgn : {1.0, -1.0}) {
      const double x = center + sgn * width;
      const double f = fn(x);
      ++res.evaluations;
      record(x, f);
      if (std::abs(f) <= tol) return {x, f, res.evaluations};
      if (lo && hi) break;
    }
    width *= 2.0;
  }
  if (!(lo && hi)) throw SolverError("solve_scalar: could not bracket a root", std::abs(fb));
  RootResult r = pegasus(fn, lo->first, lo->second, hi->first, hi->second, tol, max_iter);
  r.evaluations += res.evaluations;
  return r;
}

}  // namespace fsvp
