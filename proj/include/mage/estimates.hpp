// Measured geometric quantities: oscillation, gradient in the solution
// metric, Ricci lower bound, Schwarz trace, diameter and noncollapsing
// ratios, and the collapse diagnostics (fiber oscillation, fiberwise
// Calabi-Yau gaps, base-limit gaps, metric equivalence constants).
#pragma once

#include "mage/geodesic.hpp"
#include "mage/measure.hpp"
#include "mage/solver.hpp"

namespace mage {

inline double oscillation(const ScalarField& phi) { return phi.sup() - phi.inf(); }

// sup_X |grad phi|_g with complex gradients from centered first differences.
inline double gradient_sup(const ScalarField& phi, const HermitianField& g) {
  require_same_grid(complex_hessian(phi), g);  // layout check
  double best = 0.0;
  complex_t grad[2];
  for (index_t i = 0; i < g.node_count(); ++i) {
    complex_gradient_at(phi, i, grad);
    const double q = inv_quad_form(g.at(i), grad[0], g.n() == 2 ? grad[1] : complex_t(0.0), i);
    best = std::max(best, q);
  }
  return std::sqrt(best);
}

// Smallest C >= 0 with Ric(g) >= -C g over all nodes (direct route).
inline double ricci_lower(const HermitianField& g) {
  HermitianField ric = ricci_of_metric(g);
  double c = 0.0;
  for (index_t i = 0; i < g.node_count(); ++i)
    c = std::max(c, -gen_eig(ric.at(i), g.at(i), i).min);
  return c;
}

// Identity route: Ric(g) = -lambda g + Ric(Omega) + lambda theta.
inline double ricci_lower_identity(const HermitianField& g, const HermitianField& ric_omega,
                                   const HermitianField& theta, int lambda) {
  double c = 0.0;
  for (index_t i = 0; i < g.node_count(); ++i) {
    const Herm ric = -double(lambda) * g.at(i) + ric_omega.at(i) + double(lambda) * theta.at(i);
    c = std::max(c, -gen_eig(ric, g.at(i), i).min);
  }
  return c;
}

// sup_X tr_omega(chi).
inline double schwarz_trace(const HermitianField& omega, const HermitianField& chi) {
  double best = 0.0;
  for (index_t i = 0; i < omega.node_count(); ++i)
    best = std::max(best, trace_pair(omega.at(i), chi.at(i), i));
  return best;
}

// Fiber-block restriction of a product-grid metric over one base node.
// Only codimension-1 bases (fiber complex dimension 1) occur in the model.
inline HermitianField fiber_restrict(const HermitianField& omega, index_t base_node,
                                     const FibrationSplit& split, const PeriodicGrid& fiber_grid) {
  const PeriodicGrid& g = omega.grid();
  if (g.n_complex() - split.base_n != 1)
    throw ConfigError("fiber_restrict expects complex one-dimensional fibers");
  const PeriodicGrid base = base_grid_of(g, split);
  const int base_axes = base.axis_count();
  int bidx[4], idx[4], fidx[4];
  base.decompose(base_node, bidx);
  HermitianField out(fiber_grid);
  for (index_t f = 0; f < fiber_grid.node_count(); ++f) {
    fiber_grid.decompose(f, fidx);
    for (int a = 0; a < base_axes; ++a) idx[a] = bidx[a];
    for (int a = 0; a < fiber_grid.axis_count(); ++a) idx[base_axes + a] = fidx[a];
    const Herm m = omega.at(g.compose(idx));
    out.set(f, Herm{1, m.d1, 0.0, {0.0, 0.0}});
  }
  return out;
}

inline double fiber_mean(const ScalarField& phi, index_t base_node, const FibrationSplit& split) {
  const PeriodicGrid& g = phi.grid();
  const PeriodicGrid base = base_grid_of(g, split);
  const PeriodicGrid fiber = fiber_grid_of(g, split);
  const int base_axes = base.axis_count();
  int bidx[4], idx[4], fidx[4];
  base.decompose(base_node, bidx);
  double acc = 0.0;
  for (index_t f = 0; f < fiber.node_count(); ++f) {
    fiber.decompose(f, fidx);
    for (int a = 0; a < base_axes; ++a) idx[a] = bidx[a];
    for (int a = 0; a < fiber.axis_count(); ++a) idx[base_axes + a] = fidx[a];
    acc += phi[g.compose(idx)];
  }
  return acc / double(fiber.node_count());
}

// sup over the fiber above y of |phi - mean_fiber(phi)|.
inline double fiber_oscillation(const ScalarField& phi, index_t base_node,
                                const FibrationSplit& split) {
  const PeriodicGrid& g = phi.grid();
  const PeriodicGrid base = base_grid_of(g, split);
  const PeriodicGrid fiber = fiber_grid_of(g, split);
  const double mean = fiber_mean(phi, base_node, split);
  const int base_axes = base.axis_count();
  int bidx[4], idx[4], fidx[4];
  base.decompose(base_node, bidx);
  double best = 0.0;
  for (index_t f = 0; f < fiber.node_count(); ++f) {
    fiber.decompose(f, fidx);
    for (int a = 0; a < base_axes; ++a) idx[a] = bidx[a];
    for (int a = 0; a < fiber.axis_count(); ++a) idx[base_axes + a] = fidx[a];
    best = std::max(best, std::abs(phi[g.compose(idx)] - mean));
  }
  return best;
}

// max of |det(t^{-1} omega_fiber)/det(omega_SF) - 1| and the normalized trace
// gap |tr_{omega_SF}(t^{-1} omega_fiber)/(n-kappa) - 1| over the fiber.
inline double fiber_cy_gap(const HermitianField& omega_t, double t, index_t base_node,
                           const FibrationSplit& split, const HermitianField& omega_sf) {
  const PeriodicGrid fiber = omega_sf.grid();
  HermitianField fib = fiber_restrict(omega_t, base_node, split, fiber);
  const int nf = fiber.n_complex();
  double gap = 0.0;
  for (index_t f = 0; f < fiber.node_count(); ++f) {
    const Herm resc = (1.0 / t) * fib.at(f);
    const Herm sf = omega_sf.at(f);
    gap = std::max(gap, std::abs(det(resc) / det(sf) - 1.0));
    gap = std::max(gap, std::abs(trace_pair(sf, resc, f) / double(nf) - 1.0));
  }
  return gap;
}

// Smallest C0 with omega_t|fiber <= C0 * t * omega_SF over the fiber.
inline double fiber_domination_constant(const HermitianField& omega_t, double t,
                                        index_t base_node, const FibrationSplit& split,
                                        const HermitianField& omega_sf) {
  const PeriodicGrid fiber = omega_sf.grid();
  HermitianField fib = fiber_restrict(omega_t, base_node, split, fiber);
  double c0 = 0.0;
  for (index_t f = 0; f < fiber.node_count(); ++f)
    c0 = std::max(c0, gen_eig(fib.at(f), t * omega_sf.at(f), f).max);
  return c0;
}

// Pull the solved base metric back to the total space (zero fiber blocks).
inline HermitianField pullback_base_metric(const HermitianField& base_metric,
                                           const PeriodicGrid& full_grid,
                                           const FibrationSplit& split) {
  const PeriodicGrid base = base_grid_of(full_grid, split);
  if (!base.same_layout(base_metric.grid()))
    throw GridMismatch("base metric does not match the fibration base");
  HermitianField out(full_grid);
  int idx[4];
  for (index_t i = 0; i < full_grid.node_count(); ++i) {
    full_grid.decompose(i, idx);
    const index_t b = base.compose(idx);  // leading axes are the base
    const Herm bm = base_metric.at(b);
    out.set(i, Herm{2, bm.d0, 0.0, {0.0, 0.0}});
  }
  return out;
}

struct FiberReport {
  double fiber_oscillation = 0.0;    // sup over sampled base points
  double rescaled_fiber_gap = 0.0;   // sup fiberwise CY gap
  double fiber_diameter = 0.0;       // sup fiber diameter
  double domination_C0 = 0.0;        // omega_t|fiber <= C0 t omega_SF
};

struct BaseReport {
  double sup_gap_to_limit = 0.0;  // sup-node |omega_t - pullback(chi_inf)| in theta units
  double trace_gap = 0.0;         // sup |tr_{omega_t}(chi_inf) - kappa|
  double equivalence_C = 0.0;     // C^{-1} hat-omega <= omega <= C hat-omega
};

inline BaseReport base_limit_gap(const HermitianField& omega_t,
                                 const HermitianField& chi_inf_pullback,
                                 const HermitianField& omega_hat,
                                 const HermitianField& theta, int kappa) {
  BaseReport rep;
  for (index_t i = 0; i < omega_t.node_count(); ++i) {
    const Herm diff = omega_t.at(i) - chi_inf_pullback.at(i);
    const EigPair e = gen_eig(diff, theta.at(i), i);
    rep.sup_gap_to_limit = std::max(rep.sup_gap_to_limit, std::max(std::abs(e.min), std::abs(e.max)));
    rep.trace_gap = std::max(rep.trace_gap,
                             std::abs(trace_pair(omega_t.at(i), chi_inf_pullback.at(i), i) - kappa));
    const double up = gen_eig(omega_t.at(i), omega_hat.at(i), i).max;
    const double dn = gen_eig(omega_hat.at(i), omega_t.at(i), i).max;
    rep.equivalence_C = std::max(rep.equivalence_C, std::max(up, dn));
  }
  return rep;
}

struct BallSpec {
  std::vector<double> center;
  double radius = 0.1;
};

struct BallRatio {
  std::vector<double> center;
  double radius = 0.0;
  double ratio = 0.0;
};

struct EstimateOptions {
  bool with_diameter = true;
  GeodesicOptions geodesic;
  std::vector<BallSpec> balls;
  // Ricci of the measure: analytic family field when available, otherwise the
  // discrete Hessian of log(density); used for the Lemma 2.3 identity route.
  const HermitianField* ricci_omega = nullptr;
  bool identity_ricci = true;
  std::optional<FibrationSplit> fibration;
  const Solution* base_limit = nullptr;  // solved base equation, for BaseReport
  int fiber_sample_count = 4;            // base points sampled for FiberReport
};

struct EstimateReport {
  double oscillation = 0.0;
  double gradient_sup = 0.0;
  double ricci_lower_C = 0.0;
  double schwarz_trace_sup = 0.0;
  double diameter = 0.0;
  std::vector<BallRatio> volume_ratios;
  std::optional<FiberReport> fiber;
  std::optional<BaseReport> base;
};

inline EstimateReport estimate_report(const Solution& sol, const ProblemSpec& spec,
                                      const EstimateOptions& opts = {}) {
  const PeriodicGrid& g = *spec.grid;
  EstimateReport rep;
  rep.oscillation = oscillation(sol.phi);
  rep.gradient_sup = gradient_sup(sol.phi, sol.metric);

  HermitianField theta_f = materialize(spec.theta, g);
  if (opts.ricci_omega && opts.identity_ricci) {
    rep.ricci_lower_C = ricci_lower_identity(sol.metric, *opts.ricci_omega, theta_f, spec.lambda);
  } else if (opts.identity_ricci) {
    ScalarField logd(g);
    for (index_t i = 0; i < g.node_count(); ++i) logd[i] = std::log(spec.density[i]);
    HermitianField ric(g);
    for (index_t i = 0; i < g.node_count(); ++i)
      ric.set(i, -1.0 * complex_hessian_at(logd, i));
    rep.ricci_lower_C = ricci_lower_identity(sol.metric, ric, theta_f, spec.lambda);
  } else {
    rep.ricci_lower_C = ricci_lower(sol.metric);
  }

  HermitianField chi_f = materialize(spec.chi, g);
  rep.schwarz_trace_sup = schwarz_trace(sol.metric, chi_f);

  if (opts.with_diameter) {
    GeodesicEstimator est(sol.metric, opts.geodesic);
    rep.diameter = est.diameter();
    for (const BallSpec& b : opts.balls) {
      BallRatio r;
      r.center = b.center;
      r.radius = b.radius;
      r.ratio = est.ball_volume_ratio(est.node_at(b.center), b.radius);
      rep.volume_ratios.push_back(std::move(r));
    }
  }

  if (opts.fibration) {
    const FibrationSplit split = *opts.fibration;
    const PeriodicGrid base = base_grid_of(g, split);
    const PeriodicGrid fiber = fiber_grid_of(g, split);
    // flat-fiber Calabi-Yau representative: theta restricted to the fiber
    HermitianField omega_sf(fiber);
    omega_sf.fill(Herm{1, spec.theta.constant_part.n == 2 ? spec.theta.constant_part.d1
                                                          : spec.theta.constant_part.d0,
                       0.0,
                       {0.0, 0.0}});
    FiberReport fr;
    const index_t stride = std::max<index_t>(1, base.node_count() / opts.fiber_sample_count);
    for (index_t b = 0; b < base.node_count(); b += stride) {
      fr.fiber_oscillation = std::max(fr.fiber_oscillation, fiber_oscillation(sol.phi, b, split));
      fr.rescaled_fiber_gap = std::max(
          fr.rescaled_fiber_gap,
          fiber_cy_gap(sol.metric, spec.effective_t(), b, split, omega_sf));
      fr.domination_C0 = std::max(
          fr.domination_C0,
          fiber_domination_constant(sol.metric, spec.effective_t(), b, split, omega_sf));
      HermitianField fib = fiber_restrict(sol.metric, b, split, fiber);
      GeodesicOptions fiber_geo = opts.geodesic;
      fiber_geo.extension_resolution = 0;
      fr.fiber_diameter = std::max(fr.fiber_diameter, GeodesicEstimator(fib, fiber_geo).diameter());
    }
    rep.fiber = fr;

    if (opts.base_limit) {
      HermitianField chi_inf = pullback_base_metric(opts.base_limit->metric, g, split);
      HermitianField omega_hat = detail::reference_form(spec);
      rep.base = base_limit_gap(sol.metric, chi_inf, omega_hat, theta_f, split.base_n);
    }
  }
  return rep;
}

}  // namespace mage
