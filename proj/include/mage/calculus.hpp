// Discrete differential and pointwise linear-algebra kernels.
//
// Complex Hessian convention (Full mode, centered second-order differences):
//   phi_{j kbar} = 1/4 (D_{x_j x_k} + D_{y_j y_k} + i D_{x_j y_k} - i D_{y_j x_k}) phi
// Reduced mode keeps phi_{j kbar} = 1/4 D_{x_j x_k} phi.  Volume-form ratios
// are plain determinant ratios: omega^n / theta^n := det(G) / det(Theta).
#pragma once

#include "mage/field.hpp"

namespace mage {

// Centered second difference along one axis.
inline double d2_axis(const ScalarField& f, index_t node, int axis) {
  const PeriodicGrid& g = f.grid();
  const double h = g.spacing()[axis];
  return (f[g.shift(node, axis, +1)] - 2.0 * f[node] + f[g.shift(node, axis, -1)]) / (h * h);
}

// Centered cross second difference along two distinct axes.
inline double d2_cross(const ScalarField& f, index_t node, int a, int b) {
  const PeriodicGrid& g = f.grid();
  const double ha = g.spacing()[a];
  const double hb = g.spacing()[b];
  const index_t pp = g.shift(g.shift(node, a, +1), b, +1);
  const index_t pm = g.shift(g.shift(node, a, +1), b, -1);
  const index_t mp = g.shift(g.shift(node, a, -1), b, +1);
  const index_t mm = g.shift(g.shift(node, a, -1), b, -1);
  return (f[pp] - f[pm] - f[mp] + f[mm]) / (4.0 * ha * hb);
}

// Centered first difference along one axis.
inline double d1_axis(const ScalarField& f, index_t node, int axis) {
  const PeriodicGrid& g = f.grid();
  const double h = g.spacing()[axis];
  return (f[g.shift(node, axis, +1)] - f[g.shift(node, axis, -1)]) / (2.0 * h);
}

inline Herm complex_hessian_at(const ScalarField& phi, index_t i) {
  const PeriodicGrid& g = phi.grid();
  const int n = g.n_complex();
  Herm h = Herm::zero(n);
  if (g.mode() == GridMode::Reduced) {
    h.d0 = 0.25 * d2_axis(phi, i, g.x_axis(0));
    if (n == 2) {
      h.d1 = 0.25 * d2_axis(phi, i, g.x_axis(1));
      h.off = complex_t(0.25 * d2_cross(phi, i, g.x_axis(1), g.x_axis(0)), 0.0);
    }
    return h;
  }
  h.d0 = 0.25 * (d2_axis(phi, i, g.x_axis(0)) + d2_axis(phi, i, g.y_axis(0)));
  if (n == 2) {
    h.d1 = 0.25 * (d2_axis(phi, i, g.x_axis(1)) + d2_axis(phi, i, g.y_axis(1)));
    // phi_{1 0bar} = 1/4 (phi_{x1 x0} + phi_{y1 y0} + i phi_{x1 y0} - i phi_{y1 x0})
    const double re = d2_cross(phi, i, g.x_axis(1), g.x_axis(0)) +
                      d2_cross(phi, i, g.y_axis(1), g.y_axis(0));
    const double im = d2_cross(phi, i, g.x_axis(1), g.y_axis(0)) -
                      d2_cross(phi, i, g.y_axis(1), g.x_axis(0));
    h.off = 0.25 * complex_t(re, im);
  }
  return h;
}

inline HermitianField complex_hessian(const ScalarField& phi) {
  HermitianField out(phi.grid());
  for (index_t i = 0; i < out.node_count(); ++i)
    out.set(i, complex_hessian_at(phi, i));
  return out;
}

// Complex gradient (d/dz_j) at a node, centered first differences.
inline void complex_gradient_at(const ScalarField& phi, index_t i, complex_t* out) {
  const PeriodicGrid& g = phi.grid();
  for (int j = 0; j < g.n_complex(); ++j) {
    const double dx = d1_axis(phi, i, g.x_axis(j));
    const double dy = g.mode() == GridMode::Full ? d1_axis(phi, i, g.y_axis(j)) : 0.0;
    out[j] = 0.5 * complex_t(dx, -dy);
  }
}

// Materialize a background form on a grid: constant part plus the complex
// Hessian of the optional potential.
inline HermitianField materialize(const BackgroundForm& form, const PeriodicGrid& grid) {
  if (form.n() != grid.n_complex())
    throw GridMismatch("background form dimension does not match grid");
  HermitianField out(grid);
  if (form.potential_part) {
    if (!form.potential_part->grid().same_layout(grid))
      throw GridMismatch("background potential lives on a different grid");
    for (index_t i = 0; i < out.node_count(); ++i)
      out.set(i, form.constant_part + complex_hessian_at(*form.potential_part, i));
  } else {
    out.fill(form.constant_part);
  }
  return out;
}

// chi + t*theta + i del dbar phi, with positivity verified at every node.
inline HermitianField metric_from_potential(const BackgroundForm& chi, double t,
                                            const BackgroundForm& theta,
                                            const ScalarField& phi) {
  const PeriodicGrid& grid = phi.grid();
  HermitianField chi_f = materialize(chi, grid);
  HermitianField theta_f = materialize(theta, grid);
  HermitianField out(grid);
  double worst = std::numeric_limits<double>::infinity();
  index_t worst_node = 0;
  for (index_t i = 0; i < out.node_count(); ++i) {
    const Herm m = chi_f.at(i) + t * theta_f.at(i) + complex_hessian_at(phi, i);
    out.set(i, m);
    const double e = min_eig(m);
    if (e < worst) {
      worst = e;
      worst_node = i;
    }
  }
  if (!(worst > 0.0)) throw PositivityLost(worst_node, worst);
  out.set_positivity_checked(true);
  return out;
}

// Pointwise det(omega) / det(theta_vol).
inline ScalarField det_ratio(const HermitianField& omega, const HermitianField& theta_vol) {
  require_same_grid(omega, theta_vol);
  ScalarField out(omega.grid());
  for (index_t i = 0; i < omega.node_count(); ++i)
    out[i] = det(omega.at(i)) / det(theta_vol.at(i));
  return out;
}

// Pointwise tr(g^{-1} h).
inline ScalarField trace_pair(const HermitianField& g, const HermitianField& h) {
  require_same_grid(g, h);
  ScalarField out(g.grid());
  for (index_t i = 0; i < g.node_count(); ++i)
    out[i] = trace_pair(g.at(i), h.at(i), i);
  return out;
}

inline ScalarField log_det_field(const HermitianField& g) {
  ScalarField out(g.grid());
  for (index_t i = 0; i < g.node_count(); ++i) out[i] = logdet_chol(g.at(i), i);
  return out;
}

// Ric(g) = -i del dbar log det(g).
inline HermitianField ricci_of_metric(const HermitianField& g) {
  ScalarField ld = log_det_field(g);
  HermitianField out(g.grid());
  for (index_t i = 0; i < out.node_count(); ++i)
    out.set(i, -1.0 * complex_hessian_at(ld, i));
  return out;
}

inline double integrate(const ScalarField& s, const ScalarField& weight) {
  require_same_grid(s, weight);
  double acc = 0.0;
  for (index_t i = 0; i < s.size(); ++i) acc += s[i] * weight[i];
  return acc * s.grid().cell_volume();
}

inline double integrate(const ScalarField& s) {
  double acc = 0.0;
  for (index_t i = 0; i < s.size(); ++i) acc += s[i];
  return acc * s.grid().cell_volume();
}

inline ScalarField det_field(const HermitianField& g) {
  ScalarField out(g.grid());
  for (index_t i = 0; i < g.node_count(); ++i) out[i] = det(g.at(i));
  return out;
}

}  // namespace mage
