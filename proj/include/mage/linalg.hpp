// Per-node Hermitian matrix kernels for complex dimension 1 and 2.
//
// A Herm value stores the lower triangle of an n x n Hermitian matrix:
// real diagonal (d0, d1) and the (1,0) entry `off` when n = 2.  Everything
// the library needs from these matrices is closed form at this size, and
// these kernels sit in the innermost loops of every field operation.
#pragma once

#include <cmath>
#include <complex>

#include "mage/common.hpp"

namespace mage {

using complex_t = std::complex<double>;

struct Herm {
  int n = 1;
  double d0 = 0.0;
  double d1 = 0.0;
  complex_t off{0.0, 0.0};  // entry (row 1, col 0); unused when n == 1

  static Herm zero(int n) { return Herm{n, 0.0, 0.0, {0.0, 0.0}}; }
  static Herm identity(int n) { return Herm{n, 1.0, 1.0, {0.0, 0.0}}; }
  static Herm diag(double a, double b) { return Herm{2, a, b, {0.0, 0.0}}; }

  Herm& operator+=(const Herm& o) {
    d0 += o.d0;
    d1 += o.d1;
    off += o.off;
    return *this;
  }
  friend Herm operator+(Herm a, const Herm& b) { return a += b; }
  friend Herm operator-(Herm a, const Herm& b) {
    a.d0 -= b.d0;
    a.d1 -= b.d1;
    a.off -= b.off;
    return a;
  }
  friend Herm operator*(double s, Herm a) {
    a.d0 *= s;
    a.d1 *= s;
    a.off *= s;
    return a;
  }
};

inline double det(const Herm& h) {
  return h.n == 1 ? h.d0 : h.d0 * h.d1 - std::norm(h.off);
}

inline double trace(const Herm& h) { return h.n == 1 ? h.d0 : h.d0 + h.d1; }

inline double min_eig(const Herm& h) {
  if (h.n == 1) return h.d0;
  const double t = 0.5 * (h.d0 + h.d1);
  const double g = 0.5 * (h.d0 - h.d1);
  const double r = std::sqrt(g * g + std::norm(h.off));
  return t - r;
}

inline double max_eig(const Herm& h) {
  if (h.n == 1) return h.d0;
  const double t = 0.5 * (h.d0 + h.d1);
  const double g = 0.5 * (h.d0 - h.d1);
  const double r = std::sqrt(g * g + std::norm(h.off));
  return t + r;
}

// log det via Cholesky-style elimination; requires positive definiteness.
inline double logdet_chol(const Herm& g, index_t node = -1) {
  if (g.n == 1) {
    if (!(g.d0 > 0.0)) throw SingularMetric(node);
    return std::log(g.d0);
  }
  if (!(g.d0 > 0.0)) throw SingularMetric(node);
  const double schur = g.d1 - std::norm(g.off) / g.d0;
  if (!(schur > 0.0)) throw SingularMetric(node);
  return std::log(g.d0) + std::log(schur);
}

// tr(g^{-1} h); g must be invertible (positive definite in all callers).
inline double trace_pair(const Herm& g, const Herm& h, index_t node = -1) {
  if (g.n == 1) {
    if (g.d0 == 0.0) throw SingularMetric(node);
    return h.d0 / g.d0;
  }
  const double dg = det(g);
  if (dg == 0.0) throw SingularMetric(node);
  // adj(g) = [[d1, -conj(off)], [-off, d0]]
  const double num = g.d1 * h.d0 + g.d0 * h.d1 - 2.0 * std::real(std::conj(g.off) * h.off);
  return num / dg;
}

// Extremal generalized eigenvalues of the Hermitian pencil (h, g), g > 0:
// the roots of det(h - mu g) = 0.
struct EigPair {
  double min;
  double max;
};

inline EigPair gen_eig(const Herm& h, const Herm& g, index_t node = -1) {
  if (g.n == 1) {
    if (!(g.d0 > 0.0)) throw SingularMetric(node);
    const double v = h.d0 / g.d0;
    return {v, v};
  }
  const double a = det(g);
  if (!(a > 0.0)) throw SingularMetric(node);
  const double b = g.d1 * h.d0 + g.d0 * h.d1 - 2.0 * std::real(std::conj(g.off) * h.off);
  const double c = det(h);
  double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) disc = 0.0;  // Hermitian pencil: negative only by round-off
  const double r = std::sqrt(disc);
  return {(b - r) / (2.0 * a), (b + r) / (2.0 * a)};
}

// v* g^{-1} v for a complex vector v (v0, v1); g positive definite.
inline double inv_quad_form(const Herm& g, complex_t v0, complex_t v1,
                            index_t node = -1) {
  if (g.n == 1) {
    if (!(g.d0 > 0.0)) throw SingularMetric(node);
    return std::norm(v0) / g.d0;
  }
  const double dg = det(g);
  if (!(dg > 0.0)) throw SingularMetric(node);
  // v* adj(g) v = d1|v0|^2 + d0|v1|^2 - 2 Re(conj(v0) conj(off) v1)
  const double q = g.d1 * std::norm(v0) + g.d0 * std::norm(v1) -
                   2.0 * std::real(std::conj(v0) * std::conj(g.off) * v1);
  return q / dg;
}

// v* h v for a complex vector v (Hermitian quadratic form, real valued).
inline double quad_form(const Herm& h, complex_t v0, complex_t v1) {
  if (h.n == 1) return h.d0 * std::norm(v0);
  return h.d0 * std::norm(v0) + h.d1 * std::norm(v1) +
         2.0 * std::real(std::conj(v1) * h.off * v0);
}

// Real quadratic form of the induced Riemannian metric: for a real tangent
// vector with components xi (d/dx) and eta (d/dy), ds^2 = w* H w, w = xi+i*eta.
inline double real_quad_form(const Herm& h, const double* xi, const double* eta) {
  if (h.n == 1) return quad_form(h, complex_t(xi[0], eta[0]), 0.0);
  return quad_form(h, complex_t(xi[0], eta[0]), complex_t(xi[1], eta[1]));
}

// Inverse as an explicit Herm (g positive definite).
inline Herm inverse(const Herm& g, index_t node = -1) {
  if (g.n == 1) {
    if (!(g.d0 > 0.0)) throw SingularMetric(node);
    return Herm{1, 1.0 / g.d0, 0.0, {0.0, 0.0}};
  }
  const double dg = det(g);
  if (!(dg > 0.0)) throw SingularMetric(node);
  return Herm{2, g.d1 / dg, g.d0 / dg, -g.off / dg};
}

}  // namespace mage
