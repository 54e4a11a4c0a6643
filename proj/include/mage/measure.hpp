// Right-hand-side density families and their measured hypotheses.
//
// The singular family is e^{-f} = c * exp(smooth) * (eps^2 + u)^{-alpha} with
// u = sum over represented real axes of sin^2(pi (x_a - c_a)), vanishing
// quadratically exactly at the configured center.  Families carry closed-form
// first and second derivatives, so hypothesis measurements (sup, Ricci
// bounds) can be evaluated exactly at nodes in addition to the generic
// finite-difference route.
#pragma once

#include "mage/calculus.hpp"

namespace mage {

enum class MeasureKind : std::uint8_t { Smooth = 0, SingularPole = 1, Product = 2 };

struct MeasureFamily {
  MeasureKind kind = MeasureKind::Smooth;
  double alpha = 0.4;          // pole exponent
  double epsilon = 0.1;        // regularizer
  std::vector<double> center;  // torus point, one entry per represented axis
  double p = 2.0;              // integrability exponent
  // Smooth factor exp(sum_j amplitudes[j] * cos(2 pi (x_j - center_xj))) for
  // Smooth/SingularPole; Product uses prod_j (1 + amplitudes[j] * cos(...)).
  // One amplitude per complex coordinate, applied on the real axis x_j.
  std::vector<double> amplitudes;

  void validate_for(const PeriodicGrid& grid) const {
    if (kind == MeasureKind::SingularPole) {
      if (!(alpha > 0.0)) throw ConfigError("singular pole needs alpha > 0");
      if (!(p > 1.0)) throw ConfigError("integrability exponent p must be > 1");
      if (grid.n_complex() == 1 && !(alpha * p < 1.0))
        throw ConfigError("singular family needs alpha * p < 1 (got " +
                          std::to_string(alpha * p) + ")");
      if (epsilon == 0.0 && 2.0 * alpha >= grid.axis_count())
        throw ConfigError("eps = 0 with 2*alpha >= real codimension: quadrature diverges");
      if (epsilon < 0.0) throw ConfigError("eps must be >= 0");
    }
    if (kind == MeasureKind::Product) {
      for (double a : amplitudes)
        if (std::abs(a) >= 1.0) throw ConfigError("product amplitudes must satisfy |a| < 1");
    }
  }

  double center_at(int axis) const {
    return axis < static_cast<int>(center.size()) ? center[axis] : 0.5;
  }
  double amplitude_at(int j) const {
    return j < static_cast<int>(amplitudes.size()) ? amplitudes[j] : 0.0;
  }
};

struct DensityReport {
  double lp_norm = 0.0;
  double mass = 0.0;
  double ricci_lower_A = 0.0;
  double ricci_upper_A = 0.0;
  double sup_density = 0.0;
};

namespace detail {

// Vanishing profile u and its per-axis derivatives at a point.
inline double pole_profile(const MeasureFamily& fam, const PeriodicGrid& g,
                           const double* x) {
  double u = 0.0;
  for (int a = 0; a < g.axis_count(); ++a) {
    const double s = std::sin(M_PI * (x[a] - fam.center_at(a)));
    u += s * s;
  }
  return u;
}

inline double smooth_exponent(const MeasureFamily& fam, const PeriodicGrid& g,
                              const double* x) {
  double s = 0.0;
  for (int j = 0; j < g.n_complex(); ++j)
    s += fam.amplitude_at(j) * std::cos(2.0 * M_PI * (x[g.x_axis(j)] - fam.center_at(g.x_axis(j))));
  return s;
}

inline double raw_density(const MeasureFamily& fam, const PeriodicGrid& g,
                          const double* x) {
  switch (fam.kind) {
    case MeasureKind::Smooth:
      return std::exp(smooth_exponent(fam, g, x));
    case MeasureKind::SingularPole: {
      const double w = fam.epsilon * fam.epsilon + pole_profile(fam, g, x);
      if (w <= 0.0) throw ConfigError("singular density not finite at a node (eps = 0 on the pole)");
      return std::exp(smooth_exponent(fam, g, x)) * std::pow(w, -fam.alpha);
    }
    case MeasureKind::Product: {
      double d = 1.0;
      for (int j = 0; j < g.n_complex(); ++j)
        d *= 1.0 + fam.amplitude_at(j) *
                       std::cos(2.0 * M_PI * (x[g.x_axis(j)] - fam.center_at(g.x_axis(j))));
      return d;
    }
  }
  return 1.0;
}

}  // namespace detail

inline ScalarField normalize_mass(const ScalarField& density, double target_mass) {
  if (!(target_mass > 0.0)) throw ZeroMass();
  const double m = integrate(density);
  if (!(m > 0.0)) throw ZeroMass();
  ScalarField out = density;
  out *= target_mass / m;
  return out;
}

// Density e^{-f} > 0 with unit mass on the grid.
inline ScalarField realize_density(const MeasureFamily& fam, const PeriodicGrid& grid,
                                   double target_mass = 1.0) {
  fam.validate_for(grid);
  ScalarField raw(grid);
  double x[4];
  for (index_t i = 0; i < grid.node_count(); ++i) {
    grid.coordinates(i, x);
    raw[i] = detail::raw_density(fam, grid, x);
    if (!std::isfinite(raw[i]))
      throw ConfigError("density not finite at node " + std::to_string(i));
  }
  return normalize_mass(raw, target_mass);
}

// Normalization constant c of the realized family member (mass / raw mass).
inline double realized_constant(const MeasureFamily& fam, const PeriodicGrid& grid,
                                double target_mass = 1.0) {
  fam.validate_for(grid);
  ScalarField raw(grid);
  double x[4];
  for (index_t i = 0; i < grid.node_count(); ++i) {
    grid.coordinates(i, x);
    raw[i] = detail::raw_density(fam, grid, x);
  }
  return target_mass / integrate(raw);
}

inline double lp_norm(const ScalarField& density, double p) {
  if (!(p > 1.0)) throw ConfigError("lp_norm needs p > 1");
  double acc = 0.0;
  for (index_t i = 0; i < density.size(); ++i)
    acc += std::pow(density[i], p);
  acc *= density.grid().cell_volume();
  return std::pow(acc, 1.0 / p);
}

// Discrete-Hessian Ricci bounds of the measure: Ric(Omega) = -i del dbar log(density)
// on the flat torus (Ric(theta) = 0).  Returns (A_lower, A_upper), both >= 0,
// with Ric >= -A_lower * theta and Ric <= A_upper * theta over all nodes.
inline std::pair<double, double> ricci_bounds_of_measure(const ScalarField& density,
                                                         const BackgroundForm& theta) {
  ScalarField logd(density.grid());
  for (index_t i = 0; i < density.size(); ++i) {
    if (!(density[i] > 0.0)) throw ConfigError("density must be positive");
    logd[i] = std::log(density[i]);
  }
  HermitianField theta_f = materialize(theta, density.grid());
  double lo = 0.0, hi = 0.0;
  for (index_t i = 0; i < density.size(); ++i) {
    const Herm ric = -1.0 * complex_hessian_at(logd, i);
    const EigPair e = gen_eig(ric, theta_f.at(i), i);
    lo = std::max(lo, -e.min);  // Ric >= -A theta
    hi = std::max(hi, e.max);   // Ric <= A theta
  }
  return {lo, hi};
}

// Closed-form Ricci field of a family member, evaluated exactly at nodes.
// For the pole factor, Ric = alpha * HessC(log(eps^2 + u)) with
// HessC(log w) = (w * HessC(u) - du (du)^*) / w^2; the smooth factor adds
// its diagonal trigonometric Hessian.
inline HermitianField analytic_ricci_of_family(const MeasureFamily& fam,
                                               const PeriodicGrid& grid) {
  HermitianField out(grid);
  const int n = grid.n_complex();
  const bool full = grid.mode() == GridMode::Full;
  double x[4];
  for (index_t i = 0; i < grid.node_count(); ++i) {
    grid.coordinates(i, x);
    Herm ric = Herm::zero(n);

    // -HessC(smooth exponent) and -HessC(log of product factor)
    for (int j = 0; j < n; ++j) {
      const double cx = fam.center_at(grid.x_axis(j));
      const double arg = 2.0 * M_PI * (x[grid.x_axis(j)] - cx);
      double entry = 0.0;
      if (fam.kind == MeasureKind::Product) {
        const double a = fam.amplitude_at(j);
        const double fj = 1.0 + a * std::cos(arg);
        // (log f)'' = -4 pi^2 a (cos + a) / f^2 on the x_j axis
        const double lff = -4.0 * M_PI * M_PI * a * (std::cos(arg) + a) / (fj * fj);
        entry = -0.25 * lff;
      } else {
        const double a = fam.amplitude_at(j);
        entry = -0.25 * (-4.0 * M_PI * M_PI * a * std::cos(arg));
      }
      if (j == 0) ric.d0 += entry;
      else ric.d1 += entry;
    }

    if (fam.kind == MeasureKind::SingularPole) {
      const double w = fam.epsilon * fam.epsilon + detail::pole_profile(fam, grid, x);
      // complex gradient and Hessian of u (u separable over real axes)
      complex_t du[2] = {0.0, 0.0};
      double hdiag[2] = {0.0, 0.0};
      for (int j = 0; j < n; ++j) {
        const int ax = grid.x_axis(j);
        const double sx = M_PI * std::sin(2.0 * M_PI * (x[ax] - fam.center_at(ax)));
        const double cxx = 2.0 * M_PI * M_PI * std::cos(2.0 * M_PI * (x[ax] - fam.center_at(ax)));
        double sy = 0.0, cyy = 0.0;
        if (full) {
          const int ay = grid.y_axis(j);
          sy = M_PI * std::sin(2.0 * M_PI * (x[ay] - fam.center_at(ay)));
          cyy = 2.0 * M_PI * M_PI * std::cos(2.0 * M_PI * (x[ay] - fam.center_at(ay)));
        }
        du[j] = 0.5 * complex_t(sx, -sy);
        hdiag[j] = 0.25 * (cxx + cyy);
      }
      Herm hlog = Herm::zero(n);
      hlog.d0 = (w * hdiag[0] - std::norm(du[0])) / (w * w);
      if (n == 2) {
        hlog.d1 = (w * hdiag[1] - std::norm(du[1])) / (w * w);
        hlog.off = -(du[1] * std::conj(du[0])) / (w * w);
      }
      ric += fam.alpha * hlog;
    }
    out.set(i, ric);
  }
  return out;
}

inline std::pair<double, double> analytic_ricci_bounds(const MeasureFamily& fam,
                                                       const PeriodicGrid& grid,
                                                       const BackgroundForm& theta) {
  HermitianField ric = analytic_ricci_of_family(fam, grid);
  HermitianField theta_f = materialize(theta, grid);
  double lo = 0.0, hi = 0.0;
  for (index_t i = 0; i < grid.node_count(); ++i) {
    const EigPair e = gen_eig(ric.at(i), theta_f.at(i), i);
    lo = std::max(lo, -e.min);
    hi = std::max(hi, e.max);
  }
  return {lo, hi};
}

// Analytic supremum of the normalized density (the max sits at the pole
// center where u = 0 and the smooth exponent is maximal).
inline double analytic_sup_density(const MeasureFamily& fam, const PeriodicGrid& grid,
                                   double target_mass = 1.0) {
  const double c = realized_constant(fam, grid, target_mass);
  double amp = 0.0;
  for (int j = 0; j < grid.n_complex(); ++j) amp += std::abs(fam.amplitude_at(j));
  switch (fam.kind) {
    case MeasureKind::Smooth:
      return c * std::exp(amp);
    case MeasureKind::Product: {
      double m = 1.0;
      for (int j = 0; j < grid.n_complex(); ++j) m *= 1.0 + std::abs(fam.amplitude_at(j));
      return c * m;
    }
    case MeasureKind::SingularPole:
      return c * std::exp(amp) * std::pow(fam.epsilon * fam.epsilon, -fam.alpha);
  }
  return c;
}

// H with chi^kappa wedge theta^{n-kappa} = H theta^n in the determinant
// convention: H = (coefficient of s^{n-kappa} in det(chi + s theta)) / det(theta).
inline ScalarField jacobian_density(const BackgroundForm& chi, const BackgroundForm& theta,
                                    int kappa, const PeriodicGrid& grid) {
  HermitianField cf = materialize(chi, grid);
  HermitianField tf = materialize(theta, grid);
  ScalarField out(grid);
  const int n = grid.n_complex();
  for (index_t i = 0; i < grid.node_count(); ++i) {
    const Herm a = cf.at(i);
    const Herm b = tf.at(i);
    double coeff = 0.0;
    if (n == 1) {
      coeff = kappa == 1 ? det(a) : det(b);
    } else {
      if (kappa == 2) coeff = det(a);
      else if (kappa == 0) coeff = det(b);
      else
        coeff = a.d0 * b.d1 + a.d1 * b.d0 - 2.0 * std::real(std::conj(a.off) * b.off);
    }
    out[i] = coeff / det(b);
  }
  return out;
}

// Fibration with the first `base_n` complex coordinates as the base.
struct FibrationSplit {
  int base_n = 1;
};

inline PeriodicGrid base_grid_of(const PeriodicGrid& grid, const FibrationSplit& split) {
  std::vector<int> res;
  const int base_axes = grid.mode() == GridMode::Full ? 2 * split.base_n : split.base_n;
  for (int a = 0; a < base_axes; ++a) res.push_back(grid.resolution()[a]);
  return PeriodicGrid(split.base_n, grid.mode(), res);
}

inline PeriodicGrid fiber_grid_of(const PeriodicGrid& grid, const FibrationSplit& split) {
  std::vector<int> res;
  const int base_axes = grid.mode() == GridMode::Full ? 2 * split.base_n : split.base_n;
  for (int a = base_axes; a < grid.axis_count(); ++a) res.push_back(grid.resolution()[a]);
  return PeriodicGrid(grid.n_complex() - split.base_n, grid.mode(), res);
}

// F(y) = (integral of Omega over the fiber above y) / det(base block of chi).
inline ScalarField pushforward_density(const ScalarField& density, const FibrationSplit& split,
                                       const BackgroundForm& chi, const PeriodicGrid& base_grid) {
  const PeriodicGrid& g = density.grid();
  const int base_axes = g.mode() == GridMode::Full ? 2 * split.base_n : split.base_n;
  double chi_base_det = 0.0;
  if (split.base_n == 1) chi_base_det = chi.constant_part.d0;
  else chi_base_det = det(chi.constant_part);
  if (!(chi_base_det > 0.0)) throw DegenerateBase();

  ScalarField out(base_grid, 0.0);
  double fiber_cell = 1.0;
  for (int a = base_axes; a < g.axis_count(); ++a) fiber_cell *= g.spacing()[a];
  int idx[4];
  for (index_t i = 0; i < g.node_count(); ++i) {
    g.decompose(i, idx);
    const index_t b = base_grid.compose(idx);  // base axes lead the layout
    out[b] += density[i] * fiber_cell;
  }
  for (index_t b = 0; b < base_grid.node_count(); ++b) out[b] /= chi_base_det;
  return out;
}

// Working-grid density report with family closed forms for the pointwise
// hypotheses (sup, Ricci bounds); quadratures use `refine` times the working
// resolution, the measurement device the family checks are defined with.
inline DensityReport density_report(const MeasureFamily& fam, const PeriodicGrid& grid,
                                    const BackgroundForm& theta, int refine = 1,
                                    double target_mass = 1.0) {
  DensityReport rep;
  PeriodicGrid fine = refine == 1
                          ? grid
                          : PeriodicGrid(grid.n_complex(), grid.mode(),
                                         {grid.resolution()[0] * refine});
  ScalarField dens = realize_density(fam, fine, target_mass);
  rep.mass = integrate(dens);
  rep.lp_norm = lp_norm(dens, fam.p);
  auto [lo, hi] = analytic_ricci_bounds(fam, fine, theta);
  rep.ricci_lower_A = lo;
  rep.ricci_upper_A = hi;
  rep.sup_density = analytic_sup_density(fam, fine, target_mass);
  return rep;
}

}  // namespace mage
