// Damped-Newton solver with continuation for the Monge-Ampere families.
//
// All equations are solved in log-residual form
//   r(phi) = log det(chi + t theta + i del dbar phi)
//            - [ (n - kappa) log t + c_t[lambda=0] + lambda phi
//                + log density + log det theta ],
// whose linearization at an interior iterate is the metric Laplacian
// g^{j kbar} d_j d_kbar - lambda, kept uniformly elliptic while the iterate
// stays inside the cone.  Inner solves use BiCGStab with a flat-torus
// constant-coefficient FFT inverse as preconditioner.  The lambda = 0
// constant ambiguity is fixed by the sup phi = 0 gauge.
#pragma once

#include <functional>
#include <optional>

#include "mage/fft.hpp"
#include "mage/measure.hpp"

namespace mage {

struct ProblemSpec {
  const PeriodicGrid* grid = nullptr;
  BackgroundForm chi;
  BackgroundForm theta;
  double t = 1.0;
  int kappa = 0;  // numerical dimension of [chi] (rank of the constant part)
  int lambda = 0;
  ScalarField density;  // Omega / theta^n, positive
  double t_min_offset = 0.0;

  double effective_t() const { return t - t_min_offset; }
};

struct SolveParams {
  double residual_tol = 1e-10;
  int max_newton = 60;
  double backtrack_factor = 0.5;
  double min_step = 1.0 / double(1 << 20);
  double linear_tol = 1e-3;
  int max_linear_iters = 500;
  std::optional<ScalarField> warm_start;
  std::vector<double>* residual_history = nullptr;  // filled per accepted iterate
};

struct Solution {
  ScalarField phi;  // gauge: sup phi = 0 for lambda = 0, none for lambda = 1
  double c_t = 0.0;
  HermitianField metric;
  double residual_sup = 0.0;
  int newton_iters = 0;
  bool converged = false;
  double residual_tol = 0.0;  // tolerances the solve ran with
  double linear_tol = 0.0;
};

// [(chi + t theta)^n] = integral of det(chi + t theta) in the determinant
// volume convention.
inline double class_volume(const BackgroundForm& chi, const BackgroundForm& theta,
                           double t, const PeriodicGrid& grid) {
  HermitianField cf = materialize(chi, grid);
  HermitianField tf = materialize(theta, grid);
  double acc = 0.0;
  for (index_t i = 0; i < grid.node_count(); ++i)
    acc += det(cf.at(i) + t * tf.at(i));
  return acc * grid.cell_volume();
}

inline double measure_mass(const ProblemSpec& spec) {
  HermitianField tf = materialize(spec.theta, *spec.grid);
  double acc = 0.0;
  for (index_t i = 0; i < spec.grid->node_count(); ++i)
    acc += spec.density[i] * det(tf.at(i));
  return acc * spec.grid->cell_volume();
}

// c_t with t^{n-kappa} e^{c_t} mass(Omega) = [(chi + t theta)^n].
inline double normalization_constant(const ProblemSpec& spec) {
  const double mass = measure_mass(spec);
  if (!(mass > 0.0)) throw ZeroMass();
  const double te = spec.effective_t();
  const double cv = class_volume(spec.chi, spec.theta, te, *spec.grid);
  const int n = spec.grid->n_complex();
  return std::log(cv) - (n - spec.kappa) * std::log(te) - std::log(mass);
}

namespace detail {

// chi + t*theta materialized once per solve.
inline HermitianField reference_form(const ProblemSpec& spec) {
  HermitianField cf = materialize(spec.chi, *spec.grid);
  HermitianField tf = materialize(spec.theta, *spec.grid);
  HermitianField out(*spec.grid);
  const double te = spec.effective_t();
  for (index_t i = 0; i < spec.grid->node_count(); ++i)
    out.set(i, cf.at(i) + te * tf.at(i));
  return out;
}

// base + i del dbar phi with positivity check.
inline HermitianField add_hessian(const HermitianField& base, const ScalarField& phi) {
  HermitianField out(base.grid());
  double worst = std::numeric_limits<double>::infinity();
  index_t worst_node = 0;
  for (index_t i = 0; i < base.node_count(); ++i) {
    const Herm m = base.at(i) + complex_hessian_at(phi, i);
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

// log of the phi-independent right-hand side factor.
inline ScalarField rhs_log_field(const ProblemSpec& spec, double c_t) {
  const PeriodicGrid& g = *spec.grid;
  HermitianField tf = materialize(spec.theta, g);
  ScalarField out(g);
  const double te = spec.effective_t();
  const double base = (g.n_complex() - spec.kappa) * std::log(te) +
                      (spec.lambda == 0 ? c_t : 0.0);
  for (index_t i = 0; i < g.node_count(); ++i) {
    if (!(spec.density[i] > 0.0)) throw ZeroMass();
    out[i] = base + std::log(spec.density[i]) + logdet_chol(tf.at(i), i);
  }
  return out;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

inline void remove_mean(std::vector<double>& v) {
  const double m = mean(v);
  for (double& x : v) x -= m;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

// Single-axis periodic neighbor tables; cross stencils compose two lookups.
struct NeighborTables {
  std::vector<index_t> plus[4];
  std::vector<index_t> minus[4];

  explicit NeighborTables(const PeriodicGrid& g) {
    for (int a = 0; a < g.axis_count(); ++a) {
      plus[a].resize(static_cast<std::size_t>(g.node_count()));
      minus[a].resize(static_cast<std::size_t>(g.node_count()));
      for (index_t i = 0; i < g.node_count(); ++i) {
        plus[a][static_cast<std::size_t>(i)] = g.shift(i, a, +1);
        minus[a][static_cast<std::size_t>(i)] = g.shift(i, a, -1);
      }
    }
  }
};

// Metric Laplacian minus lambda: y = tr(Ginv Hess(v)) - lambda v.
class MetricLaplacian {
 public:
  MetricLaplacian(const PeriodicGrid& grid, const HermitianField& metric, int lambda)
      : g_(&grid), nbr_(grid), lambda_(lambda) {
    const index_t n = grid.node_count();
    ginv_.resize(static_cast<std::size_t>(n));
    for (index_t i = 0; i < n; ++i) ginv_[static_cast<std::size_t>(i)] = inverse(metric.at(i), i);
  }

  // Mean per-axis coefficient of D_aa, used by the FFT preconditioner.
  std::vector<double> axis_coefficients() const {
    const PeriodicGrid& g = *g_;
    std::vector<double> c(g.axis_count(), 0.0);
    for (const Herm& gi : ginv_) {
      for (int j = 0; j < g.n_complex(); ++j) {
        const double d = 0.25 * (j == 0 ? gi.d0 : gi.d1);
        c[g.x_axis(j)] += d;
        if (g.mode() == GridMode::Full) c[g.y_axis(j)] += d;
      }
    }
    for (double& v : c) v /= double(g.node_count());
    return c;
  }

  void apply(const std::vector<double>& v, std::vector<double>& y) const {
    const PeriodicGrid& g = *g_;
    const index_t n = g.node_count();
    y.resize(static_cast<std::size_t>(n));
    const int nc = g.n_complex();
    const bool full = g.mode() == GridMode::Full;
    const auto& spacing = g.spacing();
    for (index_t ii = 0; ii < n; ++ii) {
      const std::size_t i = static_cast<std::size_t>(ii);
      const Herm& gi = ginv_[i];
      double acc = -lambda_ * v[i];
      // diagonal entries of the complex Hessian
      for (int j = 0; j < nc; ++j) {
        const double w = 0.25 * (j == 0 ? gi.d0 : gi.d1);
        const int ax = g.x_axis(j);
        const double hx = spacing[ax];
        acc += w * (v[nbr_.plus[ax][i]] - 2.0 * v[i] + v[nbr_.minus[ax][i]]) / (hx * hx);
        if (full) {
          const int ay = g.y_axis(j);
          const double hy = spacing[ay];
          acc += w * (v[nbr_.plus[ay][i]] - 2.0 * v[i] + v[nbr_.minus[ay][i]]) / (hy * hy);
        }
      }
      if (nc == 2) {
        // off-diagonal: 2 Re(conj(Ginv_{10}) Hess_{10})
        const complex_t gi10 = gi.off;
        double re_h = 0.0, im_h = 0.0;
        const int x0 = g.x_axis(0), x1 = g.x_axis(1);
        auto cross = [&](int a, int b) {
          const double ha = spacing[a], hb = spacing[b];
          const std::size_t pp = static_cast<std::size_t>(nbr_.plus[b][nbr_.plus[a][i]]);
          const std::size_t pm = static_cast<std::size_t>(nbr_.minus[b][nbr_.plus[a][i]]);
          const std::size_t mp = static_cast<std::size_t>(nbr_.plus[b][nbr_.minus[a][i]]);
          const std::size_t mm = static_cast<std::size_t>(nbr_.minus[b][nbr_.minus[a][i]]);
          return (v[pp] - v[pm] - v[mp] + v[mm]) / (4.0 * ha * hb);
        };
        re_h = cross(x1, x0);
        if (full) {
          const int y0 = g.y_axis(0), y1 = g.y_axis(1);
          re_h += cross(y1, y0);
          im_h = cross(x1, y0) - cross(y1, x0);
        }
        acc += 2.0 * 0.25 * (gi10.real() * re_h + gi10.imag() * im_h);
      }
      y[i] = acc;
    }
  }

 private:
  const PeriodicGrid* g_;
  NeighborTables nbr_;
  std::vector<Herm> ginv_;
  int lambda_;
};

// Preconditioned BiCGStab; returns the relative residual reached.
inline double bicgstab(const MetricLaplacian& A, const FlatLaplacianSolver& fft,
                       const std::vector<double>& coeff, int lambda,
                       const std::vector<double>& b, std::vector<double>& x,
                       double rel_tol, int max_iters, bool mean_zero) {
  const std::size_t n = b.size();
  x.assign(n, 0.0);
  std::vector<double> r = b;
  if (mean_zero) remove_mean(r);
  const double bnorm = norm2(r);
  if (bnorm == 0.0) return 0.0;
  std::vector<double> rhat = r, p(n, 0.0), v(n, 0.0), s(n), t(n), phat(n), shat(n), tmp(n);
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  double rel = 1.0;
  for (int it = 0; it < max_iters; ++it) {
    const double rho1 = dot(rhat, r);
    if (std::abs(rho1) < 1e-300) break;
    if (it == 0) {
      p = r;
    } else {
      const double beta = (rho1 / rho) * (alpha / omega);
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    }
    rho = rho1;
    fft.solve(coeff, double(lambda), p, phat);
    if (mean_zero) remove_mean(phat);
    A.apply(phat, tmp);
    if (mean_zero) remove_mean(tmp);
    v = tmp;
    const double denom = dot(rhat, v);
    if (std::abs(denom) < 1e-300) break;
    alpha = rho / denom;
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    if (norm2(s) / bnorm < rel_tol) {
      for (std::size_t i = 0; i < n; ++i) x[i] += alpha * phat[i];
      rel = norm2(s) / bnorm;
      break;
    }
    fft.solve(coeff, double(lambda), s, shat);
    if (mean_zero) remove_mean(shat);
    A.apply(shat, tmp);
    if (mean_zero) remove_mean(tmp);
    t = tmp;
    const double tt = dot(t, t);
    if (tt < 1e-300) break;
    omega = dot(t, s) / tt;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * phat[i] + omega * shat[i];
      r[i] = s[i] - omega * t[i];
    }
    rel = norm2(r) / bnorm;
    if (rel < rel_tol) break;
    if (std::abs(omega) < 1e-300) break;
  }
  if (mean_zero) remove_mean(x);
  return rel;
}

}  // namespace detail

// Pointwise log residual of the equation at phi (with the given c_t).
inline ScalarField residual(const ProblemSpec& spec, const ScalarField& phi,
                            double c_t) {
  HermitianField ref = detail::reference_form(spec);
  HermitianField metric = detail::add_hessian(ref, phi);
  ScalarField rhs = detail::rhs_log_field(spec, c_t);
  ScalarField out(*spec.grid);
  for (index_t i = 0; i < spec.grid->node_count(); ++i)
    out[i] = logdet_chol(metric.at(i), i) - spec.lambda * phi[i] - rhs[i];
  return out;
}

inline ScalarField residual(const ProblemSpec& spec, const ScalarField& phi) {
  return residual(spec, phi, normalization_constant(spec));
}

// Manufactured right-hand side: the density for which phi_star solves the
// equation on the grid.  By default the discrete complex Hessian of phi_star
// is used (phi_star is then an exact discrete solution); passing the analytic
// Hessian instead manufactures the continuum problem, so a discrete solve
// recovers phi_star with the scheme's O(h^2) error.
inline ScalarField manufactured_rhs(const ProblemSpec& spec_without_density,
                                    const ScalarField& phi_star,
                                    const HermitianField* analytic_hessian = nullptr) {
  const ProblemSpec& spec = spec_without_density;
  const PeriodicGrid& g = *spec.grid;
  HermitianField ref = detail::reference_form(spec);
  HermitianField tf = materialize(spec.theta, g);
  const double te = spec.effective_t();
  const int n = g.n_complex();
  ScalarField out(g);
  double worst = std::numeric_limits<double>::infinity();
  index_t worst_node = 0;
  for (index_t i = 0; i < g.node_count(); ++i) {
    const Herm hess = analytic_hessian ? analytic_hessian->at(i) : complex_hessian_at(phi_star, i);
    const Herm m = ref.at(i) + hess;
    const double e = min_eig(m);
    if (e < worst) {
      worst = e;
      worst_node = i;
    }
    out[i] = det(m) * std::exp(-spec.lambda * phi_star[i]) /
             (std::pow(te, n - spec.kappa) * det(tf.at(i)));
  }
  if (!(worst > 0.0)) throw PositivityLost(worst_node, worst);
  return out;
}

inline Solution solve_ma(const ProblemSpec& spec, const SolveParams& params) {
  const PeriodicGrid& g = *spec.grid;
  if (!spec.density.all_finite() || spec.density.size() != g.node_count())
    throw ConfigError("problem density is missing or invalid");
  if (!(spec.effective_t() > 0.0))
    throw ConfigError("solve_ma requires t - t_min_offset > 0");

  const double c_t = normalization_constant(spec);
  HermitianField ref = detail::reference_form(spec);
  {
    const auto [e, node] = ref.min_eig_over_nodes();
    if (!(e > 0.0)) throw PositivityLost(node, e);
  }
  ScalarField rhs = detail::rhs_log_field(spec, c_t);

  ScalarField phi(g, 0.0);
  if (params.warm_start) {
    if (!params.warm_start->grid().same_layout(g))
      throw GridMismatch("warm start lives on a different grid");
    // fall back to the flat start if the warm start left the cone
    try {
      detail::add_hessian(ref, *params.warm_start);
      phi = *params.warm_start;
    } catch (const PositivityLost&) {
    }
  }

  FlatLaplacianSolver fft(g);
  const bool mean_zero = spec.lambda == 0;

  // For lambda = 0 the discrete problem is solvable only up to a constant
  // (the discrete wedge-integral identity holds to O(h^2)), so the residual
  // is projected onto mean zero against the det(metric) weight -- the
  // left-null direction of the linearized operator.
  auto residual_of = [&](const ScalarField& p, const HermitianField& metric) {
    ScalarField r(g);
    for (index_t i = 0; i < g.node_count(); ++i)
      r[i] = logdet_chol(metric.at(i), i) - spec.lambda * p[i] - rhs[i];
    if (mean_zero) {
      double wsum = 0.0, rsum = 0.0;
      for (index_t i = 0; i < g.node_count(); ++i) {
        const double w = det(metric.at(i));
        wsum += w;
        rsum += w * r[i];
      }
      r += -rsum / wsum;
    }
    return r;
  };

  HermitianField metric = detail::add_hessian(ref, phi);
  ScalarField res = residual_of(phi, metric);
  double res_sup = res.sup_abs();
  double best = res_sup;
  int iter = 0;
  bool positivity_blocked = false;
  double blocked_eig = 0.0;
  index_t blocked_node = 0;
  if (params.residual_history) params.residual_history->push_back(res_sup);

  for (; iter < params.max_newton && res_sup > params.residual_tol; ++iter) {
    detail::MetricLaplacian A(g, metric, spec.lambda);
    std::vector<double> b(res.values());
    for (double& v : b) v = -v;
    std::vector<double> delta;
    // inexact Newton forcing: tighten the inner solve as the residual drops
    const double forcing = std::min(params.linear_tol, res_sup);
    detail::bicgstab(A, fft, A.axis_coefficients(), spec.lambda, b, delta,
                     forcing, params.max_linear_iters, mean_zero);

    double step = 1.0;
    bool accepted = false;
    while (step >= params.min_step) {
      ScalarField cand = phi;
      for (index_t i = 0; i < g.node_count(); ++i)
        cand[i] += step * delta[static_cast<std::size_t>(i)];
      try {
        HermitianField mc = detail::add_hessian(ref, cand);
        ScalarField rc = residual_of(cand, mc);
        const double rn = rc.sup_abs();
        if (rn < res_sup || rn <= params.residual_tol) {
          phi = std::move(cand);
          metric = std::move(mc);
          res = std::move(rc);
          res_sup = rn;
          best = std::min(best, rn);
          accepted = true;
          if (params.residual_history) params.residual_history->push_back(rn);
          break;
        }
      } catch (const PositivityLost& e) {
        positivity_blocked = true;
        blocked_eig = e.eigenvalue;
        blocked_node = e.node;
      }
      step *= params.backtrack_factor;
    }
    if (!accepted) {
      if (positivity_blocked && step < params.min_step)
        throw PositivityLost(blocked_node, blocked_eig);
      throw NoConvergence("Newton stalled before reaching tolerance", best);
    }
  }

  if (res_sup > params.residual_tol)
    throw NoConvergence("Newton did not converge in max_newton iterations", best);

  if (spec.lambda == 0) phi += -phi.sup();  // sup phi = 0 gauge

  Solution sol;
  sol.phi = std::move(phi);
  sol.c_t = c_t;
  sol.metric = std::move(metric);
  sol.residual_sup = res_sup;
  sol.newton_iters = iter;
  sol.converged = true;
  sol.residual_tol = params.residual_tol;
  sol.linear_tol = params.linear_tol;
  return sol;
}

struct ContinuationFailure {
  double t = 0.0;
  std::string what;
};

struct ContinuationResult {
  std::vector<double> t_values;
  std::vector<Solution> solutions;
  std::optional<ContinuationFailure> failure;
};

// Solve along a strictly decreasing t schedule, warm starting from the
// previous solution; c_t is recomputed exactly at each step.
inline ContinuationResult continuation_path(const ProblemSpec& spec_template,
                                            const std::vector<double>& t_schedule,
                                            const SolveParams& params) {
  for (std::size_t k = 1; k < t_schedule.size(); ++k)
    if (!(t_schedule[k] < t_schedule[k - 1]))
      throw ConfigError("t schedule must be strictly decreasing");
  ContinuationResult out;
  SolveParams p = params;
  for (double t : t_schedule) {
    ProblemSpec spec = spec_template;
    spec.t = t;
    try {
      Solution sol = solve_ma(spec, p);
      p.warm_start = sol.phi;
      out.t_values.push_back(t);
      out.solutions.push_back(std::move(sol));
    } catch (const Error& e) {
      out.failure = ContinuationFailure{t, e.what()};
      break;
    }
  }
  return out;
}

// Empirical t_min: bisection between the last solvable and first unsolvable t.
// Failure means PositivityLost or NoConvergence of a cold-started solve.
inline double detect_tmin(const ProblemSpec& spec_template, const SolveParams& params,
                          double bisection_tol, double t_hi = 1.0) {
  auto solvable = [&](double t) {
    ProblemSpec spec = spec_template;
    spec.t = t;
    spec.t_min_offset = 0.0;
    try {
      SolveParams p = params;
      p.warm_start.reset();
      solve_ma(spec, p);
      return true;
    } catch (const PositivityLost&) {
      return false;
    } catch (const NoConvergence&) {
      return false;
    }
  };
  if (!solvable(t_hi)) return t_hi;
  double lo = std::min(bisection_tol, 1e-3);
  if (solvable(lo)) return 0.0;
  double hi = t_hi;
  while (hi - lo > bisection_tol) {
    const double mid = 0.5 * (lo + hi);
    if (solvable(mid)) hi = mid;
    else lo = mid;
  }
  return 0.5 * (lo + hi);
}

inline double binom(int n, int k) {
  double v = 1.0;
  for (int i = 0; i < k; ++i) v = v * double(n - i) / double(i + 1);
  return v;
}

// Base-dimension limit equation
//   (chi_base + i del dbar phi)^kappa = binom(n, kappa) F e^{lambda phi + c} chi_base^kappa
// solved on the base torus; for lambda = 0 the constant c normalizes total
// mass to the base class volume.
inline Solution solve_base_limit(const PeriodicGrid& base_grid, const BackgroundForm& chi_base,
                                 const ScalarField& F, int n_total, int lambda,
                                 const SolveParams& params) {
  const int kappa = base_grid.n_complex();
  ProblemSpec spec;
  spec.grid = &base_grid;
  spec.chi = BackgroundForm(Herm::zero(kappa));
  spec.theta = chi_base;
  spec.t = 1.0;
  spec.kappa = 0;
  spec.lambda = lambda;
  spec.density = ScalarField(base_grid);
  const double factor = binom(n_total, kappa);
  for (index_t i = 0; i < base_grid.node_count(); ++i) {
    if (!(F[i] > 0.0)) throw ZeroMass();
    spec.density[i] = factor * F[i];
  }
  return solve_ma(spec, params);
}

}  // namespace mage
