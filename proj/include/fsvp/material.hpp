#pragma once

/**
 * @file material.hpp
 * @brief Finite-strain viscoplasticity with Armstrong-Frederick kinematic and
 * saturating isotropic hardening, written in reference-configuration variables.
 *
 * State: right Cauchy-Green tensor C, inelastic tensors C_i and C_ii
 * (both unimodular), arc length s and its dissipative part s_d.
 * All energies are rho_R * psi in MPa; the density never appears separately.
 *
 * Units of eta: the overstress rule lambda_i = (1/eta) <f/k0>^m gives lambda_i
 * in 1/s only when eta is in seconds. Table values are used as seconds.
 */

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fsvp/errors.hpp"
#include "fsvp/tensor.hpp"

namespace fsvp {

inline const double kSqrt2_3 = std::sqrt(2.0 / 3.0);

struct MaterialParams {
  double k = 73500.0;   ///< bulk modulus [MPa]
  double mu = 28200.0;  ///< shear modulus [MPa]
  double c = 3500.0;    ///< microstructure modulus [MPa]
  double gamma = 460.0; ///< isotropic hardening modulus [MPa]
  double K = 270.0;     ///< initial yield stress [MPa]
  double m = 3.6;       ///< overstress exponent [-]
  double eta = 2e6;     ///< viscosity [s]
  double k0 = 1.0;      ///< normalizing stress [MPa]
  double kappa = 0.028; ///< kinematic saturation parameter [1/MPa]
  double beta = 5.0;    ///< isotropic saturation parameter [-]

  static MaterialParams table2() { return {}; }

  /// Hardening parameters used for the cyclic torsion comparison.
  static MaterialParams fig7_modified() {
    MaterialParams p;
    p.kappa = 0.0035;
    p.c = 1500.0;
    p.beta = 10.0;
    p.gamma = 1800.0;
    return p;
  }

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("material parameter violates ") + what);
    };
    require(std::isfinite(k) && k > 0.0, "k > 0");
    require(std::isfinite(mu) && mu > 0.0, "mu > 0");
    require(std::isfinite(c) && c >= 0.0, "c >= 0");
    require(std::isfinite(gamma) && gamma >= 0.0, "gamma >= 0");
    require(std::isfinite(K) && K > 0.0, "K > 0");
    require(std::isfinite(m) && m >= 1.0, "m >= 1");
    require(std::isfinite(eta) && eta >= 0.0, "eta >= 0");
    require(std::isfinite(k0) && k0 > 0.0, "k0 > 0");
    require(std::isfinite(kappa) && kappa >= 0.0, "kappa >= 0");
    require(std::isfinite(beta) && beta >= 0.0, "beta >= 0");
  }
};

struct InternalState {
  SymTensor2 C_i = SymTensor2::identity();
  SymTensor2 C_ii = SymTensor2::identity();
  double s = 0.0;
  double s_d = 0.0;

  static InternalState virgin() { return {}; }

  double s_e() const { return s - s_d; }
};

/// Stresses and the scalar yield quantities at one material state.
struct StressState {
  SymTensor2 T_tilde;  ///< 2nd Piola-Kirchhoff stress
  SymTensor2 X_tilde;  ///< backstress
  SymTensor2 T;        ///< Cauchy stress
  double F_norm = 0.0; ///< norm of the driving force
  double f = 0.0;      ///< overstress
  double R = 0.0;      ///< isotropic hardening
};

namespace detail {
inline void require_spd(const SymTensor2& a, const char* what) {
  if (!is_spd(a)) throw DomainError(std::string(what) + ": argument is not symmetric positive definite");
}
}  // namespace detail

/// T = k ln(sqrt(det C)) C^-1 + mu C^-1 (unimodular(C) C_i^-1)^D.
/// The deviatoric term is expanded as J^(-1/3) [C_i^-1 - tr(C C_i^-1)/3 C^-1]
/// with J = det C, so the result is symmetric by construction.
inline SymTensor2 second_pk_stress(const SymTensor2& C, const SymTensor2& C_i, const MaterialParams& p) {
  detail::require_spd(C, "second_pk_stress");
  detail::require_spd(C_i, "second_pk_stress");
  const double detC = det(C);
  const SymTensor2 Cinv = inverse(C);
  const SymTensor2 Ciinv = inverse(C_i);
  const double scale = std::cbrt(1.0 / detC);
  const double tr = ddot(C, Ciinv);
  return Cinv * (0.5 * p.k * std::log(detC)) + (Ciinv - Cinv * (tr / 3.0)) * (p.mu * scale);
}

/// X = (c/2) C_i^-1 (C_i C_ii^-1)^D = (c/2) [C_ii^-1 - tr(C_i C_ii^-1)/3 C_i^-1].
inline SymTensor2 backstress(const SymTensor2& C_i, const SymTensor2& C_ii, const MaterialParams& p) {
  detail::require_spd(C_i, "backstress");
  detail::require_spd(C_ii, "backstress");
  const SymTensor2 Ciiinv = inverse(C_ii);
  const double tr = ddot(C_i, Ciiinv);
  return (Ciiinv - inverse(C_i) * (tr / 3.0)) * (0.5 * p.c);
}

/// T = (det F)^-1 F T_tilde F^T.
inline SymTensor2 cauchy_stress(const Tensor2& F, const SymTensor2& T_tilde) {
  const double J = det(F);
  if (!(J > 0.0)) throw DomainError("cauchy_stress: det F must be positive");
  return push(F, T_tilde) * (1.0 / J);
}

/// (C T - C_i X)^D, the pulled-back driving force (not symmetric in general).
inline Tensor2 driving_force_dev(const SymTensor2& C, const SymTensor2& T_tilde, const SymTensor2& C_i,
                                 const SymTensor2& X_tilde) {
  return deviator(C.full() * T_tilde.full() - C_i.full() * X_tilde.full());
}

/// sqrt(tr[(M^D)^2]) for an M similar to a symmetric tensor. Tiny negative
/// radicands from roundoff are clamped; larger ones are a logic error.
inline double trace_square_norm(const Tensor2& md) {
  const double r = trace(md * md);
  if (r >= 0.0) return std::sqrt(r);
  const double scale = std::max(1.0, ddot(md, md));
  if (r < -1e-12 * scale) throw std::logic_error("driving force norm: negative radicand");
  return 0.0;
}

inline double driving_force_norm(const SymTensor2& C, const SymTensor2& T_tilde, const SymTensor2& C_i,
                                 const SymTensor2& X_tilde) {
  return trace_square_norm(driving_force_dev(C, T_tilde, C_i, X_tilde));
}

struct PerzynaResult {
  double f;
  double lambda_i;
};

/// Overstress f = F_norm - sqrt(2/3)(K + R) and multiplier (1/eta) <f/k0>^m.
/// With eta == 0 and f > 0 the multiplier is undefined (rate-independent
/// limit); that case throws DomainError and must go through the consistency solve.
inline PerzynaResult perzyna(double F_norm, double R, const MaterialParams& p) {
  const double f = F_norm - kSqrt2_3 * (p.K + R);
  if (f <= 0.0) return {f, 0.0};
  if (p.eta == 0.0) throw DomainError("perzyna: eta = 0 is the rate-independent limit, use the consistency solve");
  return {f, std::pow(f / p.k0, p.m) / p.eta};
}

/// rho_R psi = (k/2)(ln sqrt det(C C_i^-1))^2 + (mu/2)(tr unimodular(C C_i^-1) - 3)
///           + (c/4)(tr unimodular(C_i C_ii^-1) - 3) + (gamma/2) s_e^2
inline double free_energy(const SymTensor2& C, const SymTensor2& C_i, const SymTensor2& C_ii, double s_e,
                          const MaterialParams& p) {
  detail::require_spd(C, "free_energy");
  detail::require_spd(C_i, "free_energy");
  detail::require_spd(C_ii, "free_energy");
  const SymTensor2 Ciinv = inverse(C_i);
  const SymTensor2 Ciiinv = inverse(C_ii);
  const double d_el = det(C) * det(Ciinv);
  const double d_kin = det(C_i) * det(Ciiinv);
  const double ln_j = 0.5 * std::log(d_el);
  const double tr_el = ddot(C, Ciinv) * std::cbrt(1.0 / d_el);
  const double tr_kin = ddot(C_i, Ciiinv) * std::cbrt(1.0 / d_kin);
  return 0.5 * p.k * ln_j * ln_j + 0.5 * p.mu * (tr_el - 3.0) + 0.25 * p.c * (tr_kin - 3.0) +
         0.5 * p.gamma * s_e * s_e;
}

/// Quantities at the end of one step needed for the dissipation increment.
struct DissipationInput {
  double xi = 0.0;          ///< incremental inelastic parameter
  double F_norm = 0.0;      ///< driving-force norm at t_{n+1}
  double R = 0.0;           ///< isotropic hardening at t_{n+1}
  double delta_s_d = 0.0;   ///< s_d increment over the step
  SymTensor2 C_i = SymTensor2::identity();
  SymTensor2 X_tilde;
};

/// Dissipation over one step, rho_R delta_i * dt:
///   xi (F - sqrt(2/3) R)  +  xi kappa tr[((C_i X)^D)^2]  +  R delta_s_d.
/// Each bracket is non-negative for admissible states.
inline double dissipation_increment(const DissipationInput& in, const MaterialParams& p) {
  if (in.xi == 0.0) return in.R * in.delta_s_d;
  const Tensor2 xi_dev = deviator(in.C_i.full() * in.X_tilde.full());
  const double xi_norm2 = trace(xi_dev * xi_dev);
  return in.xi * (in.F_norm - kSqrt2_3 * in.R) + in.xi * p.kappa * xi_norm2 + in.R * in.delta_s_d;
}

/// All stress quantities for a given deformation and internal state.
inline StressState evaluate_stresses(const Tensor2& F, const InternalState& state, const MaterialParams& p) {
  StressState out;
  const SymTensor2 C = right_cauchy_green(F);
  out.T_tilde = second_pk_stress(C, state.C_i, p);
  out.X_tilde = backstress(state.C_i, state.C_ii, p);
  out.T = cauchy_stress(F, out.T_tilde);
  out.F_norm = driving_force_norm(C, out.T_tilde, state.C_i, out.X_tilde);
  out.R = p.gamma * state.s_e();
  out.f = out.F_norm - kSqrt2_3 * (p.K + out.R);
  return out;
}

}  // namespace fsvp
