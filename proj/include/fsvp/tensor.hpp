#pragma once

/**
 * @file tensor.hpp
 * @brief Fixed-size 3x3 tensor algebra.
 *
 * Tensor2 stores all nine components row-major. SymTensor2 stores the six
 * independent components of a symmetric tensor in the order
 * (11, 22, 33, 12, 13, 23); off-diagonal entries are stored unscaled, i.e.
 * the value a12 == a21 itself (no Voigt factor of 2).
 *
 * TangentMatrix is a 6x6 matrix acting on that component ordering. Column b
 * holds the derivative with respect to the stored component b, where a
 * perturbation of an off-diagonal component moves both a_ij and a_ji. Hence
 * for off-diagonal columns M(a, b) = 2 * K_{a,ij} of the fourth-order tensor
 * K with dT = K : dC, and the same factor shows up in the finite-difference
 * routines that build tangents.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <utility>

#include <Eigen/Dense>

#include "fsvp/errors.hpp"

namespace fsvp {

struct Tensor2 {
  std::array<double, 9> a{};

  double& operator()(int i, int j) { return a[3 * i + j]; }
  double operator()(int i, int j) const { return a[3 * i + j]; }

  static Tensor2 zero() { return {}; }
  static Tensor2 identity() {
    Tensor2 t;
    t(0, 0) = t(1, 1) = t(2, 2) = 1.0;
    return t;
  }
  static Tensor2 diag(double d0, double d1, double d2) {
    Tensor2 t;
    t(0, 0) = d0;
    t(1, 1) = d1;
    t(2, 2) = d2;
    return t;
  }

  Tensor2& operator+=(const Tensor2& o) {
    for (std::size_t k = 0; k < 9; ++k) a[k] += o.a[k];
    return *this;
  }
  Tensor2& operator-=(const Tensor2& o) {
    for (std::size_t k = 0; k < 9; ++k) a[k] -= o.a[k];
    return *this;
  }
  Tensor2& operator*=(double s) {
    for (auto& v : a) v *= s;
    return *this;
  }

  friend bool operator==(const Tensor2&, const Tensor2&) = default;
};

inline Tensor2 operator+(Tensor2 x, const Tensor2& y) { return x += y; }
inline Tensor2 operator-(Tensor2 x, const Tensor2& y) { return x -= y; }
inline Tensor2 operator-(Tensor2 x) { return x *= -1.0; }
inline Tensor2 operator*(Tensor2 x, double s) { return x *= s; }
inline Tensor2 operator*(double s, Tensor2 x) { return x *= s; }

inline Tensor2 operator*(const Tensor2& x, const Tensor2& y) {
  Tensor2 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r(i, j) = x(i, 0) * y(0, j) + x(i, 1) * y(1, j) + x(i, 2) * y(2, j);
  return r;
}

/// Symmetric second-rank tensor, components (11, 22, 33, 12, 13, 23).
struct SymTensor2 {
  std::array<double, 6> v{};

  static constexpr std::array<std::pair<int, int>, 6> kIndex{
      {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}}};

  double& operator[](std::size_t k) { return v[k]; }
  double operator[](std::size_t k) const { return v[k]; }

  double operator()(int i, int j) const {
    if (i == j) return v[i];
    const int s = i + j;  // (0,1)->1, (0,2)->2, (1,2)->3
    return v[2 + s];
  }

  static SymTensor2 zero() { return {}; }
  static SymTensor2 identity() { return {{1.0, 1.0, 1.0, 0.0, 0.0, 0.0}}; }

  Tensor2 full() const {
    Tensor2 t;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t(i, j) = (*this)(i, j);
    return t;
  }

  SymTensor2& operator+=(const SymTensor2& o) {
    for (std::size_t k = 0; k < 6; ++k) v[k] += o.v[k];
    return *this;
  }
  SymTensor2& operator-=(const SymTensor2& o) {
    for (std::size_t k = 0; k < 6; ++k) v[k] -= o.v[k];
    return *this;
  }
  SymTensor2& operator*=(double s) {
    for (auto& x : v) x *= s;
    return *this;
  }

  friend bool operator==(const SymTensor2&, const SymTensor2&) = default;
};

inline SymTensor2 operator+(SymTensor2 x, const SymTensor2& y) { return x += y; }
inline SymTensor2 operator-(SymTensor2 x, const SymTensor2& y) { return x -= y; }
inline SymTensor2 operator*(SymTensor2 x, double s) { return x *= s; }
inline SymTensor2 operator*(double s, SymTensor2 x) { return x *= s; }

using TangentMatrix = Eigen::Matrix<double, 6, 6>;

// ---------------------------------------------------------------------------
// Core linear algebra

inline Tensor2 transpose(const Tensor2& x) {
  Tensor2 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = x(j, i);
  return r;
}

inline double trace(const Tensor2& x) { return x(0, 0) + x(1, 1) + x(2, 2); }
inline double trace(const SymTensor2& x) { return x[0] + x[1] + x[2]; }

inline double det(const Tensor2& x) {
  return x(0, 0) * (x(1, 1) * x(2, 2) - x(1, 2) * x(2, 1)) -
         x(0, 1) * (x(1, 0) * x(2, 2) - x(1, 2) * x(2, 0)) +
         x(0, 2) * (x(1, 0) * x(2, 1) - x(1, 1) * x(2, 0));
}

inline double det(const SymTensor2& x) {
  return x[0] * (x[1] * x[2] - x[5] * x[5]) - x[3] * (x[3] * x[2] - x[5] * x[4]) +
         x[4] * (x[3] * x[5] - x[1] * x[4]);
}

/// A : B = tr(A B^T)
inline double ddot(const Tensor2& x, const Tensor2& y) {
  double s = 0.0;
  for (std::size_t k = 0; k < 9; ++k) s += x.a[k] * y.a[k];
  return s;
}

inline double ddot(const SymTensor2& x, const SymTensor2& y) {
  return x[0] * y[0] + x[1] * y[1] + x[2] * y[2] + 2.0 * (x[3] * y[3] + x[4] * y[4] + x[5] * y[5]);
}

inline double frobenius(const Tensor2& x) { return std::sqrt(ddot(x, x)); }
inline double frobenius(const SymTensor2& x) { return std::sqrt(ddot(x, x)); }

/// Cofactor inverse. Throws DomainError when |det| <= 1e-14 * |A|^3.
inline Tensor2 inverse(const Tensor2& x) {
  const double d = det(x);
  const double n = frobenius(x);
  if (!(std::abs(d) > 1e-14 * n * n * n)) throw DomainError("inverse: singular tensor");
  Tensor2 r;
  r(0, 0) = x(1, 1) * x(2, 2) - x(1, 2) * x(2, 1);
  r(0, 1) = x(0, 2) * x(2, 1) - x(0, 1) * x(2, 2);
  r(0, 2) = x(0, 1) * x(1, 2) - x(0, 2) * x(1, 1);
  r(1, 0) = x(1, 2) * x(2, 0) - x(1, 0) * x(2, 2);
  r(1, 1) = x(0, 0) * x(2, 2) - x(0, 2) * x(2, 0);
  r(1, 2) = x(0, 2) * x(1, 0) - x(0, 0) * x(1, 2);
  r(2, 0) = x(1, 0) * x(2, 1) - x(1, 1) * x(2, 0);
  r(2, 1) = x(0, 1) * x(2, 0) - x(0, 0) * x(2, 1);
  r(2, 2) = x(0, 0) * x(1, 1) - x(0, 1) * x(1, 0);
  return r * (1.0 / d);
}

inline SymTensor2 inverse(const SymTensor2& x) {
  const double d = det(x);
  const double n = frobenius(x);
  if (!(std::abs(d) > 1e-14 * n * n * n)) throw DomainError("inverse: singular tensor");
  const double s = 1.0 / d;
  return {{(x[1] * x[2] - x[5] * x[5]) * s, (x[0] * x[2] - x[4] * x[4]) * s,
           (x[0] * x[1] - x[3] * x[3]) * s, (x[4] * x[5] - x[3] * x[2]) * s,
           (x[3] * x[5] - x[4] * x[1]) * s, (x[3] * x[4] - x[0] * x[5]) * s}};
}

// ---------------------------------------------------------------------------
// Decompositions

inline Tensor2 deviator(const Tensor2& x) {
  Tensor2 r = x;
  const double m = trace(x) / 3.0;
  r(0, 0) -= m;
  r(1, 1) -= m;
  r(2, 2) -= m;
  return r;
}

inline SymTensor2 deviator(const SymTensor2& x) {
  SymTensor2 r = x;
  const double m = trace(x) / 3.0;
  r[0] -= m;
  r[1] -= m;
  r[2] -= m;
  return r;
}

inline SymTensor2 sym(const Tensor2& x) {
  return {{x(0, 0), x(1, 1), x(2, 2), 0.5 * (x(0, 1) + x(1, 0)), 0.5 * (x(0, 2) + x(2, 0)),
           0.5 * (x(1, 2) + x(2, 1))}};
}

inline Tensor2 skew(const Tensor2& x) { return x - sym(x).full(); }

struct SymSkewSplit {
  SymTensor2 sym;
  Tensor2 skew;
};

/// Split A = sym + skew with sym = (A + A^T)/2.
inline SymSkewSplit symmetrize(const Tensor2& x) {
  SymSkewSplit s{sym(x), {}};
  s.skew = x - s.sym.full();
  return s;
}

/// (det A)^(-1/3) A. Requires det A > 0.
inline Tensor2 unimodular(const Tensor2& x) {
  const double d = det(x);
  if (!(d > 0.0)) throw DomainError("unimodular: non-positive determinant");
  return x * std::cbrt(1.0 / d);
}

inline SymTensor2 unimodular(const SymTensor2& x) {
  const double d = det(x);
  if (!(d > 0.0)) throw DomainError("unimodular: non-positive determinant");
  return x * std::cbrt(1.0 / d);
}

struct Invariants {
  double J1, J2, J3;
};

/// J1 = tr A, J2 = tr(A^2)/2, J3 = tr(A^3)/3.
inline Invariants invariants(const Tensor2& x) {
  const Tensor2 x2 = x * x;
  return {trace(x), 0.5 * trace(x2), trace(x2 * x) / 3.0};
}

/// Eigenvalues of a symmetric tensor by cyclic Jacobi rotations, ascending.
inline std::array<double, 3> eigenvalues(const SymTensor2& s) {
  double m[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m[i][j] = s(i, j);
  for (int sweep = 0; sweep < 50; ++sweep) {
    const double off = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    const double diag = m[0][0] * m[0][0] + m[1][1] * m[1][1] + m[2][2] * m[2][2];
    if (off <= 1e-34 * diag || off == 0.0) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (m[p][q] == 0.0) continue;
        const double theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (int k = 0; k < 3; ++k) {
          const double mkp = m[k][p], mkq = m[k][q];
          m[k][p] = c * mkp - sn * mkq;
          m[k][q] = sn * mkp + c * mkq;
        }
        for (int k = 0; k < 3; ++k) {
          const double mpk = m[p][k], mqk = m[q][k];
          m[p][k] = c * mpk - sn * mqk;
          m[q][k] = sn * mpk + c * mqk;
        }
      }
    }
  }
  std::array<double, 3> ev{m[0][0], m[1][1], m[2][2]};
  std::sort(ev.begin(), ev.end());
  return ev;
}

struct Norms {
  double frobenius;
  double spectral;
};

inline double spectral_norm(const Tensor2& x) {
  const auto ev = eigenvalues(sym(transpose(x) * x));
  return std::sqrt(std::max(ev[2], 0.0));
}

inline Norms norms(const Tensor2& x) { return {frobenius(x), spectral_norm(x)}; }

// ---------------------------------------------------------------------------
// Tensor exponential

inline constexpr double kTexpDefaultTol = 1e-16;
inline constexpr int kTexpMaxTerms = 40;

/// exp(B) by truncated Taylor series. Valid for |B| <= 1 (Frobenius); larger
/// arguments throw StepSizeError because they signal an oversized increment.
inline Tensor2 texp(const Tensor2& b, double tol = kTexpDefaultTol) {
  if (frobenius(b) > 1.0) throw StepSizeError("texp: argument norm exceeds 1, reduce the time step");
  Tensor2 sum = Tensor2::identity();
  Tensor2 term = Tensor2::identity();
  for (int n = 1; n <= kTexpMaxTerms; ++n) {
    term = term * b * (1.0 / n);
    if (frobenius(term) <= tol * frobenius(sum)) break;
    sum += term;
  }
  return sum;
}

/// Directional derivative d/de exp(B + e H) at e = 0, from
/// sum_n 1/n! sum_k B^(n-1-k) H B^k, accumulated through
/// d(B^n)[H] = d(B^(n-1))[H] B + B^(n-1) H.
inline Tensor2 texp_derivative(const Tensor2& b, const Tensor2& h, double tol = kTexpDefaultTol) {
  if (frobenius(b) > 1.0) throw StepSizeError("texp_derivative: argument norm exceeds 1, reduce the time step");
  Tensor2 power = Tensor2::identity();  // B^(n-1)
  Tensor2 dpower = Tensor2::zero();     // d(B^(n-1))[H]
  Tensor2 sum = Tensor2::zero();
  double fact = 1.0;
  for (int n = 1; n <= kTexpMaxTerms; ++n) {
    dpower = dpower * b + power * h;  // d(B^n)[H]
    power = power * b;                // B^n
    fact *= n;
    const Tensor2 term = dpower * (1.0 / fact);
    const double tn = frobenius(term);
    sum += term;
    if (n > 1 && tn <= tol * frobenius(sum)) break;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Congruence helpers used by the constitutive relations

/// A S A^T for symmetric S, returned symmetric.
inline SymTensor2 push(const Tensor2& a, const SymTensor2& s) { return sym(a * s.full() * transpose(a)); }

inline SymTensor2 right_cauchy_green(const Tensor2& f) { return sym(transpose(f) * f); }

inline bool is_spd(const SymTensor2& s) {
  // Sylvester's criterion on leading minors.
  const double m1 = s[0];
  const double m2 = s[0] * s[1] - s[3] * s[3];
  return m1 > 0.0 && m2 > 0.0 && det(s) > 0.0;
}

}  // namespace fsvp
