#pragma once

/**
 * @file driver.hpp
 * @brief Loading programs and time marching for homogeneous material-point tests.
 *
 * Programs:
 *  - accuracy tests: F(t) interpolated between four keyframes on [0, 300] s,
 *    either projected to det F = 1 or used raw;
 *  - uniaxial: F = diag(1 + eps, a, a), T22 = T33 = 0;
 *  - torsion of a constrained tube: F = 1 + phi e1 x e2 + (a - 1) e3 x e3, T33 = 0;
 *  - uniaxial with stress-controlled segments (creep), where eps itself is
 *    found so that the technical stress follows the schedule.
 *
 * Technical stresses: uniaxial sigma = a^2 T11; torsion sigma = a T22 and
 * tau = a T12 (the section normal to e2 is spanned by e1 and e3).
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsvp/errors.hpp"
#include "fsvp/integrator.hpp"
#include "fsvp/material.hpp"
#include "fsvp/roots.hpp"
#include "fsvp/tensor.hpp"

namespace fsvp {

enum class Variant { AccuracyUnimodular, AccuracyRaw, Uniaxial, Torsion, CreepRelaxUniaxial };

enum class Control { Strain, Stress };

/// Linear ramp of the control value from v0 at t0 to v1 at t1.
struct Segment {
  double t0 = 0.0;
  double t1 = 0.0;
  Control control = Control::Strain;
  double v0 = 0.0;
  double v1 = 0.0;

  double value(double t) const {
    if (t1 == t0) return v1;
    const double w = (t - t0) / (t1 - t0);
    return v0 + w * (v1 - v0);
  }
};

struct LoadingProgram {
  Variant variant = Variant::AccuracyUnimodular;
  std::vector<Segment> schedule;  ///< unused by the accuracy variants
  double t_end = 300.0;
  double dt = 1.0;

  /// Number of steps; dt must divide t_end.
  std::size_t steps() const {
    if (dt > t_end * (1.0 + 1e-12))
      throw std::invalid_argument("loading program: dt exceeds the program length, reduce dt");
    const double n = std::round(t_end / dt);
    if (!(n >= 1.0) || std::abs(n * dt - t_end) > 1e-9 * t_end)
      throw std::invalid_argument("loading program: dt must divide t_end");
    return static_cast<std::size_t>(n);
  }

  /// Time of grid point k, exact at both ends.
  double time(std::size_t k) const { return t_end * static_cast<double>(k) / static_cast<double>(steps()); }

  const Segment& segment_at(double t) const {
    if (schedule.empty()) throw std::invalid_argument("loading program: empty schedule");
    for (const auto& s : schedule)
      if (t <= s.t1 + 1e-12 * std::max(1.0, std::abs(s.t1))) return s;
    return schedule.back();
  }

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("loading program: dt must be positive");
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("loading program: t_end must be positive");
    steps();
    const bool accuracy = variant == Variant::AccuracyUnimodular || variant == Variant::AccuracyRaw;
    if (accuracy) {
      if (t_end > 300.0 + 1e-12) throw std::invalid_argument("loading program: accuracy programs end at t <= 300");
      return;
    }
    if (schedule.empty()) throw std::invalid_argument("loading program: empty schedule");
    double t = 0.0;
    for (const auto& s : schedule) {
      if (std::abs(s.t0 - t) > 1e-9 * std::max(1.0, t) || !(s.t1 > s.t0))
        throw std::invalid_argument("loading program: schedule must be contiguous and increasing in time");
      if (s.control == Control::Stress && variant != Variant::CreepRelaxUniaxial)
        throw std::invalid_argument("loading program: stress control is only available for creep programs");
      t = s.t1;
    }
    if (t < t_end * (1.0 - 1e-12)) throw std::invalid_argument("loading program: schedule does not cover [0, t_end]");
  }
};

struct HistoryRecord {
  double t = 0.0;
  Tensor2 F = Tensor2::identity();
  SymTensor2 T;  ///< Cauchy stress
  double sigma = 0.0;
  double tau = 0.0;
  double xi = 0.0;
  double f = 0.0;
  double R = 0.0;
  double s = 0.0;
  double s_d = 0.0;
  double det_Ci = 1.0;
  double det_Cii = 1.0;
  double diss = 0.0;

  friend bool operator==(const HistoryRecord&, const HistoryRecord&) = default;
};

struct ScenarioResult {
  std::vector<HistoryRecord> history;
  double max_skew_ratio = 0.0;
  long newton_iterations = 0;
  long xi_iterations = 0;
};

namespace detail {

inline Tensor2 accuracy_keyframe(int k) {
  const double r = 1.0 / std::sqrt(2.0);
  switch (k) {
    case 0: return Tensor2::identity();
    case 1: return Tensor2::diag(2.0, r, r);
    case 2: {
      Tensor2 f = Tensor2::identity();
      f(0, 1) = 1.0;
      return f;
    }
    default: return Tensor2::diag(r, 2.0, r);
  }
}

}  // namespace detail

/// F(t) of the accuracy programs on [0, 300].
inline Tensor2 accuracy_program_F(double t, Variant variant) {
  if (variant != Variant::AccuracyUnimodular && variant != Variant::AccuracyRaw)
    throw std::invalid_argument("accuracy_program_F: not an accuracy variant");
  if (!(t >= 0.0 && t <= 300.0)) throw std::out_of_range("accuracy_program_F: t outside [0, 300]");
  const int k = std::min(2, static_cast<int>(t / 100.0));
  const double w = (t - 100.0 * k) / 100.0;
  if (w == 0.0) return detail::accuracy_keyframe(k);
  if (w == 1.0) return detail::accuracy_keyframe(k + 1);
  const Tensor2 raw = detail::accuracy_keyframe(k) * (1.0 - w) + detail::accuracy_keyframe(k + 1) * w;
  return variant == Variant::AccuracyRaw ? raw : unimodular(raw);
}

struct DriveResult {
  double alpha = 1.0;
  Tensor2 F = Tensor2::identity();
  StepResult step;
};

inline Tensor2 uniaxial_F(double eps, double alpha) { return Tensor2::diag(1.0 + eps, alpha, alpha); }

inline Tensor2 torsion_F(double phi, double alpha) {
  Tensor2 f = Tensor2::diag(1.0, 1.0, alpha);
  f(0, 1) = phi;
  return f;
}

namespace detail {

template <typename MakeF, typename Lateral, typename Scale>
DriveResult mixed_drive(MakeF make_F, Lateral lateral, Scale scale, const InternalState& prev, double dt,
                        Method method, const MaterialParams& p, const SolverSettings& settings, double alpha_guess,
                        const char* name) {
  std::optional<DriveResult> last;
  auto fn = [&](double a) {
    if (!(a > 0.0)) return -1e3 * p.k;  // pushes the search back into a > 0
    DriveResult d;
    d.alpha = a;
    d.F = make_F(a);
    d.step = step(prev, d.F, dt, method, p, settings);
    last = d;
    return lateral(d.step.T_next);
  };
  try {
    // |lateral| <= 1e-8 max(|scale|, K); K alone is the stricter bound.
    const RootResult rr = solve_scalar(fn, alpha_guess, 1e-6, 1e-8 * p.K);
    if (!last || last->alpha != rr.x) fn(rr.x);
    const double tol = 1e-8 * std::max(std::abs(scale(last->step.T_next)), p.K);
    if (!(std::abs(lateral(last->step.T_next)) <= tol))
      throw SolverError(std::string(name) + ": lateral stress not converged", std::abs(rr.fx));
    return *last;
  } catch (const SolverError& e) {
    throw SolverError(std::string(name) + ": " + e.what(), e.last_residual());
  }
}

}  // namespace detail

/// One uniaxial step: find the lateral stretch alpha with T22 = T33 = 0.
inline DriveResult uniaxial_drive(double eps, const InternalState& prev, double dt, Method method,
                                  const MaterialParams& p, const SolverSettings& settings, double alpha_guess = 1.0) {
  if (!(1.0 + eps > 0.0)) throw DomainError("uniaxial_drive: 1 + eps must be positive");
  return detail::mixed_drive([&](double a) { return uniaxial_F(eps, a); },
                             [](const SymTensor2& T) { return T[1]; }, [](const SymTensor2& T) { return T[0]; },
                             prev, dt, method, p, settings, alpha_guess, "uniaxial_drive");
}

/// One torsion step: find the radial stretch alpha with T33 = 0.
inline DriveResult torsion_drive(double phi, const InternalState& prev, double dt, Method method,
                                 const MaterialParams& p, const SolverSettings& settings, double alpha_guess = 1.0) {
  return detail::mixed_drive([&](double a) { return torsion_F(phi, a); },
                             [](const SymTensor2& T) { return T[2]; }, [](const SymTensor2& T) { return T[3]; },
                             prev, dt, method, p, settings, alpha_guess, "torsion_drive");
}

namespace detail {

inline HistoryRecord make_record(double t, const Tensor2& F, const StepResult& st) {
  HistoryRecord r;
  r.t = t;
  r.F = F;
  r.T = st.T_next;
  r.xi = st.xi;
  r.f = st.f_next;
  r.R = st.R_next;
  r.s = st.state_next.s;
  r.s_d = st.state_next.s_d;
  r.det_Ci = det(st.state_next.C_i);
  r.det_Cii = det(st.state_next.C_ii);
  r.diss = st.dissipation_increment;
  return r;
}

inline HistoryRecord initial_record(const MaterialParams& p) {
  HistoryRecord r;
  r.f = -kSqrt2_3 * p.K;
  return r;
}

}  // namespace detail

/// March a program on its uniform grid from the virgin state.
/// Failures are rethrown as ScenarioError carrying the failing time.
inline ScenarioResult run_scenario(const LoadingProgram& program, Method method, const MaterialParams& p,
                                   const SolverSettings& settings) {
  program.validate();
  p.validate();
  settings.validate();
  ScenarioResult out;
  const std::size_t n = program.steps();
  out.history.reserve(n + 1);
  out.history.push_back(detail::initial_record(p));

  InternalState state = InternalState::virgin();
  double alpha = 1.0, eps = 0.0, d_eps = 1e-6;
  double t = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    t = program.time(k);
    const double dt = t - program.time(k - 1);
    try {
      HistoryRecord rec;
      StepResult st;
      switch (program.variant) {
        case Variant::AccuracyUnimodular:
        case Variant::AccuracyRaw: {
          const Tensor2 F = accuracy_program_F(t, program.variant);
          st = step(state, F, dt, method, p, settings);
          rec = detail::make_record(t, F, st);
          break;
        }
        case Variant::Uniaxial:
        case Variant::CreepRelaxUniaxial: {
          const Segment& seg = program.segment_at(t);
          DriveResult d;
          if (seg.control == Control::Strain) {
            d = uniaxial_drive(seg.value(t), state, dt, method, p, settings, alpha);
          } else {
            const double target = seg.value(t);
            std::optional<DriveResult> last;
            auto fn = [&](double e) {
              last = uniaxial_drive(e, state, dt, method, p, settings, last ? last->alpha : alpha);
              return last->alpha * last->alpha * last->step.T_next[0] - target;
            };
            const double tol = 1e-8 * std::max(std::abs(target), p.K);
            const RootResult rr = solve_scalar(fn, eps + d_eps, std::max(1e-7, std::abs(d_eps)), tol);
            if (!last || last->F(0, 0) != 1.0 + rr.x) fn(rr.x);
            d = *last;
          }
          st = d.step;
          const double e_new = d.F(0, 0) - 1.0;
          if (e_new != eps) d_eps = e_new - eps;
          eps = e_new;
          alpha = d.alpha;
          rec = detail::make_record(t, d.F, st);
          rec.sigma = alpha * alpha * st.T_next[0];
          break;
        }
        case Variant::Torsion: {
          const DriveResult d = torsion_drive(program.segment_at(t).value(t), state, dt, method, p, settings, alpha);
          st = d.step;
          alpha = d.alpha;
          rec = detail::make_record(t, d.F, st);
          rec.sigma = alpha * st.T_next[1];
          rec.tau = alpha * st.T_next[3];
          break;
        }
      }
      state = st.state_next;
      out.max_skew_ratio = std::max(out.max_skew_ratio, st.skew_ratio);
      out.newton_iterations += st.newton_iters;
      out.xi_iterations += st.xi_iters;
      out.history.push_back(rec);
    } catch (const StepSizeError& e) {
      throw ScenarioError(std::string(e.what()) + " (t = " + std::to_string(t) + ")", t, true);
    } catch (const SolverError& e) {
      throw ScenarioError(std::string(e.what()) + " (t = " + std::to_string(t) + ")", t, false);
    } catch (const DomainError& e) {
      throw ScenarioError(std::string(e.what()) + " (t = " + std::to_string(t) + ")", t, false);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Program builders

inline LoadingProgram accuracy_program(Variant variant, double dt, double t_end = 300.0) {
  LoadingProgram prog;
  prog.variant = variant;
  prog.dt = dt;
  prog.t_end = t_end;
  prog.validate();
  return prog;
}

/// Monotonic uniaxial tension to eps_max at constant rate.
inline LoadingProgram uniaxial_monotonic(double rate, double eps_max, double dt) {
  if (!(rate > 0.0)) throw std::invalid_argument("uniaxial: rate must be positive");
  LoadingProgram prog;
  prog.variant = Variant::Uniaxial;
  prog.t_end = eps_max / rate;
  prog.dt = dt;
  prog.schedule = {{0.0, prog.t_end, Control::Strain, 0.0, eps_max}};
  prog.validate();
  return prog;
}

/// Triangular strain cycles 0 -> +a -> -a -> 0.
inline LoadingProgram uniaxial_cyclic(double rate, double amplitude, int cycles, double dt) {
  if (!(rate > 0.0 && amplitude > 0.0 && cycles > 0)) throw std::invalid_argument("uniaxial cyclic: bad parameters");
  LoadingProgram prog;
  prog.variant = Variant::Uniaxial;
  const double q = amplitude / rate;
  double t = 0.0;
  for (int c = 0; c < cycles; ++c) {
    prog.schedule.push_back({t, t + q, Control::Strain, 0.0, amplitude});
    prog.schedule.push_back({t + q, t + 3 * q, Control::Strain, amplitude, -amplitude});
    prog.schedule.push_back({t + 3 * q, t + 4 * q, Control::Strain, -amplitude, 0.0});
    t += 4 * q;
  }
  prog.t_end = t;
  prog.dt = dt;
  prog.validate();
  return prog;
}

inline LoadingProgram torsion_monotonic(double rate, double phi_max, double dt) {
  if (!(rate > 0.0)) throw std::invalid_argument("torsion: rate must be positive");
  LoadingProgram prog;
  prog.variant = Variant::Torsion;
  prog.t_end = std::abs(phi_max) / rate;
  prog.dt = dt;
  prog.schedule = {{0.0, prog.t_end, Control::Strain, 0.0, phi_max}};
  prog.validate();
  return prog;
}

/// Triangular shear cycles 0 -> +a -> -a -> 0.
inline LoadingProgram torsion_cyclic(double rate, double amplitude, int cycles, double dt) {
  LoadingProgram prog = uniaxial_cyclic(rate, amplitude, cycles, dt);
  prog.variant = Variant::Torsion;
  return prog;
}

/// Strain staircase: ramp to each level at `rate`, then hold for `hold` seconds.
/// dt is shrunk to the nearest value that divides the program length.
inline LoadingProgram relaxation_program(const std::vector<double>& levels, double rate, double hold, double dt) {
  if (levels.empty() || !(rate > 0.0) || !(hold > 0.0)) throw std::invalid_argument("relaxation: bad parameters");
  LoadingProgram prog;
  prog.variant = Variant::CreepRelaxUniaxial;
  double t = 0.0, v = 0.0;
  for (double lv : levels) {
    const double q = std::abs(lv - v) / rate;
    if (q > 0.0) prog.schedule.push_back({t, t + q, Control::Strain, v, lv});
    t += q;
    prog.schedule.push_back({t, t + hold, Control::Strain, lv, lv});
    t += hold;
    v = lv;
  }
  prog.t_end = t;
  prog.dt = t / std::ceil(t / dt - 1e-9);
  prog.validate();
  return prog;
}

/// Technical-stress staircase: ramp at `stress_rate`, hold each level for `hold` seconds.
/// dt is shrunk to the nearest value that divides the program length.
inline LoadingProgram creep_program(const std::vector<double>& levels, double stress_rate, double hold, double dt) {
  if (levels.empty() || !(stress_rate > 0.0) || !(hold > 0.0)) throw std::invalid_argument("creep: bad parameters");
  LoadingProgram prog;
  prog.variant = Variant::CreepRelaxUniaxial;
  double t = 0.0, v = 0.0;
  for (double lv : levels) {
    const double q = std::abs(lv - v) / stress_rate;
    if (q > 0.0) prog.schedule.push_back({t, t + q, Control::Stress, v, lv});
    t += q;
    prog.schedule.push_back({t, t + hold, Control::Stress, lv, lv});
    t += hold;
    v = lv;
  }
  prog.t_end = t;
  prog.dt = t / std::ceil(t / dt - 1e-9);
  prog.validate();
  return prog;
}

// ---------------------------------------------------------------------------
// Comparison and convergence

struct ComparisonMetrics {
  std::size_t shared_points = 0;
  double max_abs = 0.0;        ///< max component-wise |T_test - T_ref|
  double rms = 0.0;            ///< RMS of component differences over shared points
  double max_frobenius = 0.0;  ///< max over time of |T_test - T_ref|_F
  double ref_scale = 0.0;      ///< max over time of max |T_ref| component
  double relative_max = 0.0;   ///< max_abs / ref_scale
  std::vector<double> times;
  std::vector<double> errors;  ///< |T_test - T_ref|_F at each shared time
};

/// Compare Cauchy stresses at the test grid points; every test time must be
/// present in the reference.
inline ComparisonMetrics compare_histories(const std::vector<HistoryRecord>& test,
                                           const std::vector<HistoryRecord>& reference) {
  if (test.empty() || reference.empty()) throw std::invalid_argument("compare_histories: empty history");
  ComparisonMetrics m;
  for (const auto& r : reference)
    for (int a = 0; a < 6; ++a) m.ref_scale = std::max(m.ref_scale, std::abs(r.T[a]));
  std::size_t j = 0;
  double sum2 = 0.0;
  for (const auto& rec : test) {
    const double tol = 1e-9 * std::max(1.0, std::abs(rec.t));
    while (j < reference.size() && reference[j].t < rec.t - tol) ++j;
    if (j == reference.size() || std::abs(reference[j].t - rec.t) > tol)
      throw std::invalid_argument("compare_histories: incompatible grids, no reference point at t = " +
                                  std::to_string(rec.t));
    const SymTensor2 d = rec.T - reference[j].T;
    for (int a = 0; a < 6; ++a) {
      m.max_abs = std::max(m.max_abs, std::abs(d[a]));
      sum2 += d[a] * d[a];
    }
    const double e = frobenius(d);
    m.max_frobenius = std::max(m.max_frobenius, e);
    m.times.push_back(rec.t);
    m.errors.push_back(e);
  }
  m.shared_points = test.size();
  m.rms = std::sqrt(sum2 / (6.0 * static_cast<double>(test.size())));
  m.relative_max = m.ref_scale > 0.0 ? m.max_abs / m.ref_scale : (m.max_abs > 0.0 ? INFINITY : 0.0);
  return m;
}

struct ConvergenceResult {
  std::vector<double> dts;
  std::vector<double> errors;  ///< max-over-time Frobenius error of the Cauchy stress
  double order = std::numeric_limits<double>::quiet_NaN();
  /// True when the errors sit at roundoff level, so no order can be measured.
  bool degenerate = false;
};

/// Least-squares slope of log(error) against log(dt).
inline double observed_order(const std::vector<double>& dts, const std::vector<double>& errors) {
  const std::size_t n = dts.size();
  if (n < 2 || errors.size() != n) throw std::invalid_argument("observed_order: need at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(dts[i]);
    my += std::log(errors[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(dts[i]) - mx;
    sxy += dx * (std::log(errors[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// Convergence study against a precomputed reference history.
inline ConvergenceResult convergence_study(LoadingProgram program, Method method, const std::vector<double>& dts,
                                           const MaterialParams& p, const SolverSettings& settings,
                                           const std::vector<HistoryRecord>& reference) {
  if (dts.size() < 2) throw std::invalid_argument("convergence_study: need at least two step sizes");
  for (std::size_t i = 1; i < dts.size(); ++i)
    if (!(dts[i] < dts[i - 1])) throw std::invalid_argument("convergence_study: dts must be sorted descending");
  ConvergenceResult out;
  out.dts = dts;
  double scale = 0.0;
  for (double dt : dts) {
    program.dt = dt;
    const ComparisonMetrics m = compare_histories(run_scenario(program, method, p, settings).history, reference);
    out.errors.push_back(m.max_frobenius);
    scale = std::max(scale, m.ref_scale);
  }
  const double floor = 1e-9 * std::max(scale, p.K);
  for (double e : out.errors)
    if (!(e > floor)) out.degenerate = true;
  if (!out.degenerate) out.order = observed_order(out.dts, out.errors);
  return out;
}

/// Convergence study with the reference computed by EM at reference_dt.
inline ConvergenceResult convergence_study(const LoadingProgram& program, Method method,
                                           const std::vector<double>& dts, const MaterialParams& p,
                                           const SolverSettings& settings, double reference_dt = 0.01) {
  LoadingProgram ref = program;
  ref.dt = reference_dt;
  return convergence_study(program, method, dts, p, settings, run_scenario(ref, Method::EM, p, settings).history);
}

}  // namespace fsvp
