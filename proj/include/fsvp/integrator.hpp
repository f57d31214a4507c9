#pragma once

/**
 * @file integrator.hpp
 * @brief Local stress algorithm for the viscoplastic model.
 *
 * One step maps (previous internal state, C_{n+1}, dt) to the new state. The
 * nonlinear system is split in two:
 *  - subproblem: for a fixed incremental parameter xi, find (C_i, C_ii) from
 *      C_k = unimodular(sym(K_k)),  K_k = (1 - B_k)^-1 C_k^n   (EBM/MEBM)
 *                                   K_k = exp(B_k) C_k^n       (EM)
 *    (EBM skips the unimodular projection);
 *  - consistency: find xi such that (eta xi / dt)^(1/m) = f(xi) / k0.
 *
 * The subproblem is solved by Newton's method with a forward-difference
 * Jacobian in the 12 stored components of (C_i, C_ii). The Jacobian is kept
 * in a per-step cache and refreshed whenever the contraction rate degrades.
 * The consistency equation is solved by one Newton step on
 * H = eta xi/dt - <f/k0>^m from xi = 0, followed by Newton iterations on D;
 * whenever Newton leaves the current bracket the Pegasus method takes over.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fsvp/errors.hpp"
#include "fsvp/material.hpp"
#include "fsvp/roots.hpp"
#include "fsvp/tensor.hpp"

namespace fsvp {

enum class Method { EBM, MEBM, EM };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::EBM: return "ebm";
    case Method::MEBM: return "mebm";
    case Method::EM: return "em";
  }
  return "?";
}

struct SolverSettings {
  double newton_tol = 1e-12;  ///< subproblem residual (Frobenius, dimensionless)
  int newton_max_iter = 50;
  double xi_tol = 1e-12;      ///< consistency residual D, relative to 1 + F/k0
  int xi_max_iter = 100;
  double fd_epsilon = 1e-7;   ///< relative step of the subproblem Jacobian
  double xi_cap = 0.2;        ///< largest admissible xi per step

  void validate() const {
    if (!(newton_tol > 0.0 && newton_max_iter > 0 && xi_tol > 0.0 && xi_max_iter > 0 && fd_epsilon > 0.0 &&
          xi_cap > 0.0))
      throw std::invalid_argument("solver settings must be positive");
  }
};

struct FlowOperators {
  Tensor2 B_i;
  Tensor2 B_ii;
};

/// B_i = 2 (xi/F) (C T - C_i X)^D,  B_ii = 2 xi kappa (C_i X)^D.
inline FlowOperators flow_operators(const SymTensor2& C, const SymTensor2& C_i, const SymTensor2& C_ii, double xi,
                                    const MaterialParams& p) {
  if (xi == 0.0) return {};
  const SymTensor2 T = second_pk_stress(C, C_i, p);
  const SymTensor2 X = backstress(C_i, C_ii, p);
  const Tensor2 md = driving_force_dev(C, T, C_i, X);
  const double F = trace_square_norm(md);
  if (!(F > 0.0)) throw DomainError("flow_operators: xi > 0 with vanishing driving force");
  FlowOperators out;
  out.B_i = md * (2.0 * xi / F);
  out.B_ii = deviator(C_i.full() * X.full()) * (2.0 * xi * p.kappa);
  return out;
}

/// Unsymmetrized update K = (1 - B)^-1 C_prev (EBM, MEBM) or exp(B) C_prev (EM).
inline Tensor2 k_operator(const Tensor2& B, const SymTensor2& C_prev, Method method) {
  if (method == Method::EM) return texp(B) * C_prev.full();
  if (!(spectral_norm(B) < 1.0)) throw StepSizeError("k_operator: |B| >= 1, reduce the time step");
  try {
    return inverse(Tensor2::identity() - B) * C_prev.full();
  } catch (const DomainError&) {
    throw StepSizeError("k_operator: 1 - B is singular, reduce the time step");
  }
}

/// sym(K), followed by the unimodular projection for MEBM and EM.
inline SymTensor2 project_update(const Tensor2& K, Method method) {
  const SymTensor2 s = sym(K);
  if (method == Method::EBM) return s;
  try {
    return unimodular(s);
  } catch (const DomainError&) {
    throw StepSizeError("project_update: update left the positive cone, reduce the time step");
  }
}

struct SubproblemSolution {
  SymTensor2 C_i = SymTensor2::identity();
  SymTensor2 C_ii = SymTensor2::identity();
  int iterations = 0;
  double residual = 0.0;
  /// max over k of |skew(K_k)| / |K_k| at the returned solution
  double skew_ratio = 0.0;
};

namespace detail {

using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;

inline Vec12 pack(const SymTensor2& a, const SymTensor2& b) {
  Vec12 y;
  for (int j = 0; j < 6; ++j) {
    y[j] = a[j];
    y[6 + j] = b[j];
  }
  return y;
}

inline std::pair<SymTensor2, SymTensor2> unpack(const Vec12& y) {
  std::pair<SymTensor2, SymTensor2> out;
  for (int j = 0; j < 6; ++j) {
    out.first[j] = y[j];
    out.second[j] = y[6 + j];
  }
  return out;
}

/// The fixed-point map (C_i, C_ii) -> (map(K_i), map(K_ii)) for fixed C, xi.
struct SubproblemMap {
  SymTensor2 C;
  double xi;
  const InternalState* prev;
  Method method;
  const MaterialParams* p;

  struct Image {
    SymTensor2 C_i, C_ii;
    Tensor2 K_i, K_ii;
  };

  Image image(const SymTensor2& C_i, const SymTensor2& C_ii) const {
    const FlowOperators B = flow_operators(C, C_i, C_ii, xi, *p);
    Image out;
    out.K_i = k_operator(B.B_i, prev->C_i, method);
    out.K_ii = k_operator(B.B_ii, prev->C_ii, method);
    out.C_i = project_update(out.K_i, method);
    // frozen microstructure: keep the previous value bit-for-bit
    out.C_ii = xi * p->kappa == 0.0 ? prev->C_ii : project_update(out.K_ii, method);
    return out;
  }

  Vec12 residual(const Vec12& y) const {
    const auto [ci, cii] = unpack(y);
    const Image im = image(ci, cii);
    return y - pack(im.C_i, im.C_ii);
  }
};

/// Residual size: the larger of the two Frobenius norms.
inline double residual_norm(const Vec12& r) {
  auto part = [&](int off) {
    SymTensor2 s;
    for (int j = 0; j < 6; ++j) s[j] = r[off + j];
    return frobenius(s);
  };
  return std::max(part(0), part(6));
}

inline double skew_ratio(const Tensor2& K) {
  const double n = frobenius(K);
  return n > 0.0 ? frobenius(skew(K)) / n : 0.0;
}

}  // namespace detail

/// Jacobian factorization reused across subproblem solves within one step.
struct SubproblemCache {
  bool valid = false;
  Eigen::PartialPivLU<detail::Mat12> lu;
};

/// Solve the subproblem for given C_{n+1} and xi. Starts from the previous
/// state. The returned tensors are the image of the converged iterate under
/// the update map, so they are exactly symmetric and (MEBM, EM) unimodular
/// up to rounding.
inline SubproblemSolution solve_subproblem(const SymTensor2& C_next, double xi, const InternalState& prev,
                                           Method method, const MaterialParams& p, const SolverSettings& settings,
                                           SubproblemCache* cache = nullptr,
                                           const std::pair<SymTensor2, SymTensor2>* guess = nullptr) {
  if (xi < 0.0) throw DomainError("solve_subproblem: xi must be non-negative");
  SubproblemSolution sol;
  if (xi == 0.0) {
    sol.C_i = prev.C_i;
    sol.C_ii = prev.C_ii;
    return sol;
  }
  SubproblemCache local;
  SubproblemCache& jc = cache ? *cache : local;
  const detail::SubproblemMap map{C_next, xi, &prev, method, &p};

  detail::Vec12 y = guess ? detail::pack(guess->first, guess->second) : detail::pack(prev.C_i, prev.C_ii);
  detail::Vec12 r = map.residual(y);
  double rn = detail::residual_norm(r);
  bool fresh = false;
  int it = 0;

  auto refresh = [&]() {
    detail::Mat12 J;
    for (int j = 0; j < 12; ++j) {
      const double h = settings.fd_epsilon * std::max(1.0, std::abs(y[j]));
      detail::Vec12 yp = y;
      yp[j] += h;
      J.col(j) = (map.residual(yp) - r) / h;
    }
    jc.lu.compute(J);
    jc.valid = true;
    fresh = true;
  };

  while (rn > settings.newton_tol) {
    if (it >= settings.newton_max_iter)
      throw SolverError("solve_subproblem: Newton did not converge", rn);
    ++it;
    if (!jc.valid) refresh();
    const detail::Vec12 dy = jc.lu.solve(-r);
    detail::Vec12 yn, rnew;
    double rnn = std::numeric_limits<double>::infinity();
    auto trial = [&](double lambda) {
      yn = y + lambda * dy;
      try {
        rnew = map.residual(yn);
        rnn = detail::residual_norm(rnew);
      } catch (const DomainError&) {
        rnn = std::numeric_limits<double>::infinity();
      } catch (const StepSizeError&) {
        rnn = std::numeric_limits<double>::infinity();
      }
      return std::isfinite(rnn);
    };
    if (!dy.allFinite()) throw SolverError("solve_subproblem: singular Jacobian", rn);
    const bool ok = trial(1.0);
    if (!ok || !(rnn < 0.25 * rn || (fresh && rnn < rn))) {
      if (!fresh) {
        refresh();
        continue;
      }
      // Backtracking along the fresh Newton direction.
      double lambda = 1.0;
      while (!(rnn < (1.0 - 1e-4 * lambda) * rn) && lambda > 1e-3) {
        lambda *= 0.5;
        trial(lambda);
      }
      if (!(rnn < rn)) throw SolverError("solve_subproblem: Newton stagnated", rn);
      if (lambda < 1.0) jc.valid = false;
    }
    y = yn;
    r = rnew;
    rn = rnn;
    fresh = false;
  }

  const auto [ci, cii] = detail::unpack(y);
  const auto im = map.image(ci, cii);
  sol.C_i = im.C_i;
  sol.C_ii = im.C_ii;
  sol.iterations = it;
  sol.residual = rn;
  const auto check = map.image(sol.C_i, sol.C_ii);
  sol.skew_ratio = std::max(detail::skew_ratio(check.K_i), detail::skew_ratio(check.K_ii));
  return sol;
}

struct Hardening {
  double R_next;
  double tR;
};

/// R(xi) = (tR + sqrt(2/3) gamma xi) / (1 + sqrt(2/3) beta xi), tR = gamma (s - s_d).
inline Hardening hardening_closed_form(double xi, const InternalState& prev, const MaterialParams& p) {
  const double tR = p.gamma * (prev.s - prev.s_d);
  return {(tR + kSqrt2_3 * p.gamma * xi) / (1.0 + kSqrt2_3 * p.beta * xi), tR};
}

/// dR/dxi of the closed form above.
inline double hardening_slope(double xi, const InternalState& prev, const MaterialParams& p) {
  const double R = hardening_closed_form(xi, prev, p).R_next;
  return kSqrt2_3 * (p.gamma - p.beta * R) / (1.0 + kSqrt2_3 * p.beta * xi);
}

struct ConsistencyResiduals {
  double H;
  double D;
  double F_of_xi;
};

namespace detail {

/// Evaluates the consistency function for trial values of xi at one C_{n+1}.
class ConsistencyEvaluator {
 public:
  struct Eval {
    double xi = 0.0;
    double F = 0.0;  ///< driving-force norm
    double R = 0.0;
    double g = 0.0;  ///< (F - sqrt(2/3)(K + R)) / k0
    double D = 0.0;
    SubproblemSolution sub;
  };

  ConsistencyEvaluator(const SymTensor2& C, const InternalState& prev, Method method, const MaterialParams& p,
                       double dt, const SolverSettings& settings)
      : C_(C), prev_(prev), method_(method), p_(p), dt_(dt), settings_(settings) {}

  Eval operator()(double xi) {
    Eval e;
    e.xi = xi;
    try {
      e.sub = solve_subproblem(C_, xi, prev_, method_, p_, settings_, &cache_);
    } catch (const SolverError&) {
      // Close to the singular end of the admissible xi range the previous
      // state is a poor start; continue from the nearest solved xi instead.
      if (solved_.empty()) throw;
      const auto near = std::min_element(solved_.begin(), solved_.end(), [&](const auto& a, const auto& b) {
        return std::abs(a.first - xi) < std::abs(b.first - xi);
      });
      SubproblemCache fresh;
      e.sub = solve_subproblem(C_, xi, prev_, method_, p_, settings_, &fresh, &near->second);
      cache_ = fresh;
    }
    if (xi > 0.0) solved_.push_back({xi, {e.sub.C_i, e.sub.C_ii}});
    const SymTensor2 T = second_pk_stress(C_, e.sub.C_i, p_);
    const SymTensor2 X = backstress(e.sub.C_i, e.sub.C_ii, p_);
    e.F = driving_force_norm(C_, T, e.sub.C_i, X);
    e.R = hardening_closed_form(xi, prev_, p_).R_next;
    e.g = (e.F - kSqrt2_3 * (p_.K + e.R)) / p_.k0;
    e.D = viscous_term(xi) - e.g;
    ++evaluations_;
    return e;
  }

  double viscous_term(double xi) const {
    return p_.eta == 0.0 ? 0.0 : std::pow(p_.eta * xi / dt_, 1.0 / p_.m);
  }

  double viscous_slope(double xi) const {
    if (p_.eta == 0.0) return 0.0;
    return std::pow(p_.eta / dt_, 1.0 / p_.m) * std::pow(xi, 1.0 / p_.m - 1.0) / p_.m;
  }

  double tolerance(const Eval& e) const { return settings_.xi_tol * (1.0 + std::abs(e.F) / p_.k0); }

  int evaluations() const { return evaluations_; }

 private:
  SymTensor2 C_;
  const InternalState& prev_;
  Method method_;
  const MaterialParams& p_;
  double dt_;
  const SolverSettings& settings_;
  SubproblemCache cache_;
  std::vector<std::pair<double, std::pair<SymTensor2, SymTensor2>>> solved_;
  int evaluations_ = 0;
};

}  // namespace detail

/// H(xi) = eta xi/dt - <g>^m and D(xi) = (eta xi/dt)^(1/m) - g with
/// g = (F(xi) - sqrt(2/3)(K + R(xi))) / k0.
inline ConsistencyResiduals consistency_residuals(const SymTensor2& C_next, double xi, const InternalState& prev,
                                                  Method method, const MaterialParams& p, double dt,
                                                  const SolverSettings& settings) {
  if (!(dt > 0.0)) throw DomainError("consistency_residuals: dt must be positive");
  detail::ConsistencyEvaluator ev(C_next, prev, method, p, dt, settings);
  const auto e = ev(xi);
  const double bracket = e.g > 0.0 ? std::pow(e.g, p.m) : 0.0;
  return {p.eta * xi / dt - bracket, e.D, e.F};
}

struct XiSolution {
  double xi = 0.0;
  double F_norm = 0.0;
  double R = 0.0;
  double D = 0.0;
  SubproblemSolution sub;
  int iterations = 0;         ///< consistency iterations
  int newton_iterations = 0;  ///< subproblem Newton iterations, summed
};

/// Solve the consistency condition for xi. Returns xi = 0 for an elastic trial.
inline XiSolution solve_xi(const SymTensor2& C_next, const InternalState& prev, Method method,
                           const MaterialParams& p, double dt, const SolverSettings& settings) {
  if (!(dt > 0.0)) throw DomainError("solve_xi: dt must be positive");
  detail::ConsistencyEvaluator ev(C_next, prev, method, p, dt, settings);
  using Eval = detail::ConsistencyEvaluator::Eval;
  int newton_total = 0;
  auto eval = [&](double xi) {
    Eval e = ev(xi);
    newton_total += e.sub.iterations;
    return e;
  };
  auto finish = [&](const Eval& e, int iters) {
    XiSolution s;
    s.xi = e.xi;
    s.F_norm = e.F;
    s.R = e.R;
    s.D = e.D;
    s.sub = e.sub;
    s.iterations = iters;
    s.newton_iterations = newton_total;
    return s;
  };
  auto slope_g = [&](const Eval& e) {
    const double h = std::max(1e-8, 1e-6 * e.xi);
    return (eval(e.xi + h).g - e.g) / h;
  };

  const Eval e0 = eval(0.0);
  if (e0.g <= 0.0) return finish(e0, 0);

  const double cap = settings.xi_cap;
  double lo = 0.0, D_lo = e0.D;
  std::optional<std::pair<double, double>> hi;
  int iters = 0;

  auto note = [&](const Eval& e) {
    if (e.D < 0.0) {
      if (e.xi > lo) {
        lo = e.xi;
        D_lo = e.D;
      }
    } else if (!hi || e.xi < hi->first) {
      hi = {e.xi, e.D};
    }
  };

  // First iteration on H from xi = 0, where D is not differentiable.
  const double gp0 = slope_g(e0);
  const double Hp0 = p.eta / dt - p.m * std::pow(e0.g, p.m - 1.0) * gp0;
  double xi = std::pow(e0.g, p.m) / Hp0;

  // Above some xi the driving force of the subproblem vanishes and no
  // solution exists; such trial values are recorded in `bad`.
  std::optional<double> bad;
  auto try_eval = [&](double x) -> std::optional<Eval> {
    try {
      Eval e = eval(x);
      note(e);
      return e;
    } catch (const StepSizeError&) {
    } catch (const SolverError&) {
    } catch (const DomainError&) {
    }
    if (!bad || x < *bad) bad = x;
    return std::nullopt;
  };

  bool newton_ok = std::isfinite(xi) && Hp0 > 0.0;
  double last_abs_D = std::abs(e0.D);
  int no_progress = 0;
  while (newton_ok && iters < settings.xi_max_iter) {
    ++iters;
    if (!(xi > lo) || (hi && xi >= hi->first) || (bad && xi >= *bad)) break;
    if (xi > cap) break;
    const std::optional<Eval> e = try_eval(xi);
    if (!e) break;
    if (std::abs(e->D) <= ev.tolerance(*e)) return finish(*e, iters);
    if (std::abs(e->D) >= last_abs_D) {
      if (++no_progress >= 3) break;
    } else {
      no_progress = 0;
    }
    last_abs_D = std::abs(e->D);
    const double Dp = ev.viscous_slope(e->xi) - slope_g(*e);
    if (!(Dp > 0.0) || !std::isfinite(Dp)) break;
    xi = e->xi - e->D / Dp;
  }

  // Bracket search: doubling from 1e-4 up to the cap, bisecting back towards
  // lo whenever a trial value has no subproblem solution.
  if (!hi) {
    double x = 1e-4;
    while (x <= lo) x *= 2.0;
    for (int it = 0;; ++it) {
      x = std::min(x, cap);
      if (bad && x >= *bad) x = 0.5 * (lo + *bad);
      if (it > 200 || (bad && *bad - lo <= 1e-12 * std::max(1.0, lo)))
        throw StepSizeError("solve_xi: no admissible xi bracket, reduce the time step");
      const std::optional<Eval> e = try_eval(x);
      ++iters;
      if (!e) continue;
      if (e->D >= 0.0) break;
      if (x == cap) throw StepSizeError("solve_xi: xi exceeds the cap, reduce the time step");
      x = bad ? 0.5 * (x + *bad) : 2.0 * x;
    }
  }
  std::optional<Eval> last;
  auto fD = [&](double x) {
    last = eval(x);
    return last->D;
  };
  // At the root F >= sqrt(2/3)(K + R) >= sqrt(2/3)(K + tR).
  const double tol =
      settings.xi_tol * (1.0 + kSqrt2_3 * (p.K + hardening_closed_form(0.0, prev, p).R_next) / p.k0);
  const RootResult rr = pegasus(fD, lo, D_lo, hi->first, hi->second, tol, settings.xi_max_iter);
  iters += rr.evaluations;
  if (!last || last->xi != rr.x) last = eval(rr.x);
  return finish(*last, iters);
}

struct StepResult {
  InternalState state_next;
  SymTensor2 T_tilde_next;
  SymTensor2 X_tilde_next;
  SymTensor2 T_next;  ///< Cauchy stress
  double xi = 0.0;
  double f_next = 0.0;
  double R_next = 0.0;
  double F_norm = 0.0;
  int newton_iters = 0;
  int xi_iters = 0;
  double dissipation_increment = 0.0;
  double skew_ratio = 0.0;
};

/// One step driven by C_{n+1} directly. The Cauchy stress is left zero.
inline StepResult advance(const InternalState& prev, const SymTensor2& C_next, double dt, Method method,
                          const MaterialParams& p, const SolverSettings& settings) {
  if (!(dt > 0.0)) throw DomainError("step: dt must be positive");
  StepResult out;
  const Hardening h0 = hardening_closed_form(0.0, prev, p);
  const SymTensor2 T0 = second_pk_stress(C_next, prev.C_i, p);
  const SymTensor2 X0 = backstress(prev.C_i, prev.C_ii, p);
  const double F0 = driving_force_norm(C_next, T0, prev.C_i, X0);
  const double f0 = F0 - kSqrt2_3 * (p.K + h0.tR);

  if (f0 <= 0.0) {
    out.state_next = prev;
    out.T_tilde_next = T0;
    out.X_tilde_next = X0;
    out.F_norm = F0;
    out.f_next = f0;
    out.R_next = h0.tR;
    return out;
  }

  const XiSolution xs = solve_xi(C_next, prev, method, p, dt, settings);
  if (xs.xi > settings.xi_cap) throw StepSizeError("step: xi exceeds the cap, reduce the time step");

  InternalState& st = out.state_next;
  st.C_i = xs.sub.C_i;
  st.C_ii = xs.sub.C_ii;
  st.s = prev.s + kSqrt2_3 * xs.xi;
  const double ds_d = p.gamma > 0.0 ? p.beta / p.gamma * kSqrt2_3 * xs.xi * xs.R : 0.0;
  st.s_d = prev.s_d + ds_d;

  out.xi = xs.xi;
  out.R_next = xs.R;
  out.F_norm = xs.F_norm;
  out.f_next = xs.F_norm - kSqrt2_3 * (p.K + xs.R);
  out.T_tilde_next = second_pk_stress(C_next, st.C_i, p);
  out.X_tilde_next = backstress(st.C_i, st.C_ii, p);
  out.newton_iters = xs.newton_iterations;
  out.xi_iters = xs.iterations;
  out.skew_ratio = xs.sub.skew_ratio;
  out.dissipation_increment =
      dissipation_increment({xs.xi, xs.F_norm, xs.R, ds_d, st.C_i, out.X_tilde_next}, p);
  return out;
}

/// One step of the local algorithm for the deformation gradient F_{n+1}.
inline StepResult step(const InternalState& prev, const Tensor2& F_next, double dt, Method method,
                       const MaterialParams& p, const SolverSettings& settings) {
  if (!(det(F_next) > 0.0)) throw DomainError("step: det F must be positive");
  StepResult out = advance(prev, right_cauchy_green(F_next), dt, method, p, settings);
  out.T_next = cauchy_stress(F_next, out.T_tilde_next);
  return out;
}

namespace detail {

/// Central difference of a SymTensor2-valued function w.r.t. the stored
/// components of a SymTensor2 argument (off-diagonal perturbations move both
/// mirrored entries).
template <typename Fn>
TangentMatrix central_sym_jacobian(Fn&& fn, const SymTensor2& x, double rel = 1e-6) {
  TangentMatrix J;
  for (int b = 0; b < 6; ++b) {
    const double h = rel * std::max(1.0, std::abs(x[b]));
    SymTensor2 xp = x, xm = x;
    xp[b] += h;
    xm[b] -= h;
    const SymTensor2 fp = fn(xp), fm = fn(xm);
    for (int a = 0; a < 6; ++a) J(a, b) = (fp[a] - fm[a]) / (2.0 * h);
  }
  return J;
}

}  // namespace detail

/// Algorithmic tangent dT/dC (6x6, stored-component convention of tensor.hpp).
///
/// Built from the chain rule through the converged solution:
///   dT/dC = dT/dC|C_i + dT/dC_i dC_i/dC,
///   dY/dC = dY/dC|xi + dY/dxi dxi/dC,    Y = (C_i, C_ii),
///   dxi/dC = -(dD/dxi)^-1 dD/dC,
/// with the partial derivatives of the subproblem residual obtained by
/// implicit differentiation. The explicit partials are central differences
/// of closed-form functions; no step is re-solved.
inline TangentMatrix consistent_tangent_C(const InternalState& prev, const SymTensor2& C_next, double dt,
                                          Method method, const MaterialParams& p, const SolverSettings& settings) {
  const StepResult sr = advance(prev, C_next, dt, method, p, settings);
  const SymTensor2 C_i = sr.state_next.C_i;
  const SymTensor2 C_ii = sr.state_next.C_ii;

  const TangentMatrix dT_dC =
      detail::central_sym_jacobian([&](const SymTensor2& c) { return second_pk_stress(c, C_i, p); }, C_next);
  if (sr.xi == 0.0) return dT_dC;

  using detail::Mat12;
  using detail::Vec12;
  using Mat12x6 = Eigen::Matrix<double, 12, 6>;
  using Row12 = Eigen::Matrix<double, 1, 12>;
  using Row6 = Eigen::Matrix<double, 1, 6>;

  const double xi = sr.xi;
  const Vec12 y = detail::pack(C_i, C_ii);
  auto residual = [&](const Vec12& yy, const SymTensor2& c, double x) {
    return detail::SubproblemMap{c, x, &prev, method, &p}.residual(yy);
  };
  auto g_of = [&](const Vec12& yy, const SymTensor2& c) {
    const auto [ci, cii] = detail::unpack(yy);
    const SymTensor2 T = second_pk_stress(c, ci, p);
    const SymTensor2 X = backstress(ci, cii, p);
    return driving_force_norm(c, T, ci, X) / p.k0;
  };

  const double rel = 1e-6;
  Mat12 R_Y;
  Row12 g_Y;
  for (int j = 0; j < 12; ++j) {
    const double h = rel * std::max(1.0, std::abs(y[j]));
    Vec12 yp = y, ym = y;
    yp[j] += h;
    ym[j] -= h;
    R_Y.col(j) = (residual(yp, C_next, xi) - residual(ym, C_next, xi)) / (2.0 * h);
    g_Y(j) = (g_of(yp, C_next) - g_of(ym, C_next)) / (2.0 * h);
  }
  Mat12x6 R_C;
  Row6 g_C;
  for (int b = 0; b < 6; ++b) {
    const double h = rel * std::max(1.0, std::abs(C_next[b]));
    SymTensor2 cp = C_next, cm = C_next;
    cp[b] += h;
    cm[b] -= h;
    R_C.col(b) = (residual(y, cp, xi) - residual(y, cm, xi)) / (2.0 * h);
    g_C(b) = (g_of(y, cp) - g_of(y, cm)) / (2.0 * h);
  }
  const double hx = rel * xi;
  const Vec12 R_xi = (residual(y, C_next, xi + hx) - residual(y, C_next, xi - hx)) / (2.0 * hx);

  const Eigen::PartialPivLU<Mat12> lu(R_Y);
  const Mat12x6 dY_dC_fixed = -lu.solve(R_C);
  const Vec12 dY_dxi = -lu.solve(R_xi);

  // D = (eta xi/dt)^(1/m) - g(C, Y(C, xi)) + sqrt(2/3) R(xi) / k0
  const double viscous_slope =
      p.eta == 0.0 ? 0.0 : std::pow(p.eta / dt, 1.0 / p.m) * std::pow(xi, 1.0 / p.m - 1.0) / p.m;
  const double dD_dxi = viscous_slope - g_Y.dot(dY_dxi) + kSqrt2_3 * hardening_slope(xi, prev, p) / p.k0;
  const Row6 dD_dC = -(g_C + g_Y * dY_dC_fixed);
  const Row6 dxi_dC = -dD_dC / dD_dxi;
  const Mat12x6 dY_dC = dY_dC_fixed + dY_dxi * dxi_dC;

  const TangentMatrix dT_dCi =
      detail::central_sym_jacobian([&](const SymTensor2& ci) { return second_pk_stress(C_next, ci, p); }, C_i);
  return dT_dC + dT_dCi * dY_dC.topRows<6>();
}

inline TangentMatrix consistent_tangent(const InternalState& prev, const Tensor2& F_next, double dt, Method method,
                                        const MaterialParams& p, const SolverSettings& settings) {
  if (!(det(F_next) > 0.0)) throw DomainError("consistent_tangent: det F must be positive");
  return consistent_tangent_C(prev, right_cauchy_green(F_next), dt, method, p, settings);
}

}  // namespace fsvp
