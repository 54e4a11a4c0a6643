#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mage/solver.hpp"

using namespace mage;

namespace {
constexpr double kPi = 3.14159265358979323846;

// phi* = a cos(2 pi x) on a reduced 1-d grid with its exact complex Hessian.
std::pair<ScalarField, HermitianField> cosine_star(const PeriodicGrid& g, double a) {
  ScalarField phi(g);
  HermitianField hess(g);
  double x[1];
  for (index_t i = 0; i < g.node_count(); ++i) {
    g.coordinates(i, x);
    phi[i] = a * std::cos(2 * kPi * x[0]);
    hess.set(i, Herm{1, -kPi * kPi * a * std::cos(2 * kPi * x[0]), 0, {0, 0}});
  }
  return {phi, hess};
}

// phi* = a sin(2 pi x1) sin(2 pi x2) on a reduced 2-d grid, exact Hessian.
std::pair<ScalarField, HermitianField> sinsin_star(const PeriodicGrid& g, double a) {
  ScalarField phi(g);
  HermitianField hess(g);
  double x[2];
  for (index_t i = 0; i < g.node_count(); ++i) {
    g.coordinates(i, x);
    const double s1 = std::sin(2 * kPi * x[0]), s2 = std::sin(2 * kPi * x[1]);
    const double c1 = std::cos(2 * kPi * x[0]), c2 = std::cos(2 * kPi * x[1]);
    phi[i] = a * s1 * s2;
    Herm h{2, -kPi * kPi * a * s1 * s2, -kPi * kPi * a * s1 * s2,
           complex_t(kPi * kPi * a * c1 * c2, 0.0)};
    hess.set(i, h);
  }
  return {phi, hess};
}

ProblemSpec flat_spec(const PeriodicGrid& g, int lambda) {
  ProblemSpec spec;
  spec.grid = &g;
  const int n = g.n_complex();
  spec.chi = BackgroundForm(Herm::zero(n));
  spec.theta = BackgroundForm(Herm::identity(n));
  spec.t = 1.0;
  spec.kappa = 0;
  spec.lambda = lambda;
  spec.density = ScalarField(g, 1.0);
  return spec;
}
}  // namespace

TEST_CASE("class_volume constant-form arithmetic") {
  PeriodicGrid g = build_grid(2, GridMode::Reduced, 8);
  BackgroundForm chi(Herm::diag(1.0, 0.0));
  BackgroundForm theta(Herm::identity(2));
  for (double t : {1.0, 0.5, 0.1, 0.01}) {
    const double v = class_volume(chi, theta, t, g);
    CHECK(v == Catch::Approx(t * (1.0 + t)));
    const double ratio = v / t;  // t^{n-kappa} with kappa = 1
    CHECK(ratio >= 1.0);
    CHECK(ratio <= 2.0);
  }
  PeriodicGrid g1 = build_grid(1, GridMode::Reduced, 8);
  CHECK(class_volume(BackgroundForm(Herm::zero(1)), BackgroundForm(Herm::identity(1)), 1.0, g1) ==
        Catch::Approx(1.0));
  CHECK(class_volume(BackgroundForm(Herm::identity(1)), BackgroundForm(Herm::identity(1)), 0.5, g1) ==
        Catch::Approx(1.5));
}

TEST_CASE("normalization constant of the collapsing family is log(1+t)") {
  PeriodicGrid g = build_grid(2, GridMode::Reduced, 16);
  ProblemSpec spec = flat_spec(g, 0);
  spec.chi = BackgroundForm(Herm::diag(1.0, 0.0));
  spec.kappa = 1;
  for (double t : {1.0, 0.3, 0.1, 0.03, 0.01}) {
    spec.t = t;
    CHECK(normalization_constant(spec) == Catch::Approx(std::log(1.0 + t)).margin(1e-12));
  }
  // mass = class_volume / t^{n-kappa}  =>  c_t = 0
  spec.t = 0.25;
  spec.density = ScalarField(g, class_volume(spec.chi, spec.theta, 0.25, g) / 0.25);
  CHECK(normalization_constant(spec) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("residual vanishes for the trivial flat problem") {
  PeriodicGrid g = build_grid(1, GridMode::Reduced, 32);
  ProblemSpec spec = flat_spec(g, 0);
  ScalarField zero(g, 0.0);
  ScalarField r = residual(spec, zero);
  CHECK(r.sup_abs() < 1e-14);
}

TEST_CASE("residual at a manufactured solution is discretization-small") {
  PeriodicGrid g = build_grid(2, GridMode::Reduced, 64);
  auto [phi_star, hess] = sinsin_star(g, 0.05);
  ProblemSpec spec = flat_spec(g, 1);
  spec.density = manufactured_rhs(spec, phi_star, &hess);
  ScalarField r = residual(spec, phi_star);
  const double h = g.spacing()[0];
  CHECK(r.sup_abs() < 20.0 * h * h);

  // with the discrete Hessian the manufactured solution is exact on the grid
  ProblemSpec spec2 = flat_spec(g, 1);
  spec2.density = manufactured_rhs(spec2, phi_star);
  ScalarField r2 = residual(spec2, phi_star);
  CHECK(r2.sup_abs() < 1e-12);
}

TEST_CASE("manufactured density shift identity (lambda = 1)") {
  PeriodicGrid g = build_grid(1, GridMode::Reduced, 32);
  auto [phi_star, hess] = cosine_star(g, 0.03);
  ProblemSpec spec = flat_spec(g, 1);
  ScalarField d0 = manufactured_rhs(spec, phi_star, &hess);
  ScalarField shifted = phi_star;
  shifted += 0.7;
  ScalarField d1 = manufactured_rhs(spec, shifted, &hess);
  for (index_t i = 0; i < g.node_count(); ++i)
    CHECK(d1[i] == Catch::Approx(d0[i] * std::exp(-0.7)));
}

TEST_CASE("trivial solve returns the flat solution") {
  PeriodicGrid g = build_grid(2, GridMode::Reduced, 16);
  ProblemSpec spec = flat_spec(g, 0);
  Solution sol = solve_ma(spec, SolveParams{});
  CHECK(sol.converged);
  CHECK(sol.c_t == Catch::Approx(0.0).margin(1e-13));
  CHECK(sol.phi.sup_abs() < 1e-10);
  CHECK(sol.newton_iters <= 1);
}

TEST_CASE("closed-form oracle: 1 + 0.2 cos density (acceptance 2 shape)") {
  PeriodicGrid g = build_grid(1, GridMode::Reduced, 256);
  ProblemSpec spec = flat_spec(g, 0);
  double x[1];
  for (index_t i = 0; i < g.node_count(); ++i) {
    g.coordinates(i, x);
    spec.density[i] = 1.0 + 0.2 * std::cos(2 * kPi * x[0]);
  }
  Solution sol = solve_ma(spec, SolveParams{});
  CHECK(sol.converged);
  const double h = g.spacing()[0];
  double err = 0.0;
  ScalarField want(g);
  for (index_t i = 0; i < g.node_count(); ++i) {
    g.coordinates(i, x);
    want[i] = -(0.2 / (kPi * kPi)) * std::cos(2 * kPi * x[0]);
  }
  want += -want.sup();  // same sup-gauge as the solver
  for (index_t i = 0; i < g.node_count(); ++i)
    err = std::max(err, std::abs(sol.phi[i] - want[i]));
  CHECK(err < 10.0 * h * h);
  CHECK(sol.newton_iters <= 6);
}

TEST_CASE("manufactured recovery within 10 h^2 (n=2 reduced, lambda=1)") {
  PeriodicGrid g = build_grid(2, GridMode::Reduced, 64);
  auto [phi_star, hess] = sinsin_star(g, 0.05);
  ProblemSpec spec = flat_spec(g, 1);
  spec.density = manufactured_rhs(spec, phi_star, &hess);
  Solution sol = solve_ma(spec, SolveParams{});
  CHECK(sol.converged);
  double err = 0.0;
  for (index_t i = 0; i < g.node_count(); ++i)
    err = std::max(err, std::abs(sol.phi[i] - phi_star[i]));
  const double h = g.spacing()[0];
  CHECK(err < 10.0 * h * h);
}

TEST_CASE("grid refinement convergence order >= 3.5x per doubling") {
  double prev = -1.0;
  for (int res : {64, 128, 256}) {
    PeriodicGrid g = build_grid(1, GridMode::Reduced, res);
    auto [phi_star, hess] = cosine_star(g, 0.05);
    ProblemSpec spec = flat_spec(g, 0);
    spec.density = manufactured_rhs(spec, phi_star, &hess);
    Solution sol = solve_ma(spec, SolveParams{});
    ScalarField want = phi_star;
    want += -want.sup();
    double err = 0.0;
    for (index_t i = 0; i < g.node_count(); ++i)
      err = std::max(err, std::abs(sol.phi[i] - want[i]));
    if (prev > 0.0) CHECK(prev / err >= 3.5);
    prev = err;
  }
}

TEST_CASE("gauge/shift equivariance for lambda = 1") {
  PeriodicGrid g = build_grid(1, GridMode::Reduced, 64);
  auto [phi_star, hess] = cosine_star(g, 0.04);
  ProblemSpec spec = flat_spec(g, 1);
  spec.density = manufactured_rhs(spec, phi_star, &hess);
  Solution a = solve_ma(spec, SolveParams{});
  const double c = 0.37;
  for (index_t i = 0; i < g.node_count(); ++i) spec.density[i] *= std::exp(-c);
  Solution b = solve_ma(spec, SolveParams{});
  for (index_t i = 0; i < g.node_count(); ++i)
    CHECK(b.phi[i] - a.phi[i] == Catch::Approx(c).margin(1e-8));
}

TEST_CASE("translation equivariance") {
  PeriodicGrid g = build_grid(1, GridMode::Reduced, 64);
  ProblemSpec spec = flat_spec(g, 0);
  double x[1];
  for (index_t i = 0; i < g.node_count(); ++i) {
    g.coordinates(i, x);
    spec.density[i] = 1.0 + 0.15 * std::cos(2 * kPi * x[0]) + 0.1 * std::sin(4 * kPi * x[0]);
  }
  Solution a = solve_ma(spec, SolveParams{});
  const int shift_cells = 16;
  ProblemSpec spec2 = spec;
  for (index_t i = 0; i < g.node_count(); ++i)
    spec2.density[g.shift(i, 0, shift_cells)] = spec.density[i];
  Solution b = solve_ma(spec2, SolveParams{});
  for (index_t i = 0; i < g.node_count(); ++i)
    CHECK(b.phi[g.shift(i, 0, shift_cells)] == Catch::Approx(a.phi[i]).margin(1e-8));
}

TEST_CASE("mass conservation for lambda = 0") {
  PeriodicGrid g = build_grid(2, GridMode::Reduced, 32);
  ProblemSpec spec = flat_spec(g, 0);
  spec.chi = BackgroundForm(Herm::diag(1.0, 0.0));
  spec.kappa = 1;
  spec.t = 0.3;
  double x[2];
  for (index_t i = 0; i < g.node_count(); ++i) {
    g.coordinates(i, x);
    spec.density[i] = 1.0 + 0.2 * std::cos(2 * kPi * x[0]) * std::sin(2 * kPi * x[1]);
  }
  spec.density = normalize_mass(spec.density, 1.0);
  Solution sol = solve_ma(spec, SolveParams{});
  ScalarField ones(g, 1.0);
  const double vol = integrate(det_field(sol.metric), ones);
  // equality holds up to the discrete wedge-integral defect, O(h^2 amp^2)
  CHECK(vol == Catch::Approx(class_volume(spec.chi, spec.theta, 0.3, g)).epsilon(2e-4));
}

TEST_CASE("quadratic local convergence on a smooth problem") {
  PeriodicGrid g = build_grid(2, GridMode::Reduced, 32);
  auto [phi_star, hess] = sinsin_star(g, 0.08);
  ProblemSpec spec = flat_spec(g, 1);
  spec.density = manufactured_rhs(spec, phi_star, &hess);
  std::vector<double> history;
  SolveParams p;
  p.residual_history = &history;
  Solution sol = solve_ma(spec, p);
  CHECK(sol.converged);
  // squaring phase, above the inner-solver floor
  for (std::size_t k = 0; k + 1 < history.size(); ++k) {
    if (history[k] < 1e-3 && history[k] > 1e-7)
      CHECK(history[k + 1] <= 10.0 * history[k] * history[k]);
  }
}

TEST_CASE("uniqueness under random admissible warm starts") {
  PeriodicGrid g = build_grid(1, GridMode::Reduced, 64);
  ProblemSpec spec = flat_spec(g, 0);
  double x[1];
  for (index_t i = 0; i < g.node_count(); ++i) {
    g.coordinates(i, x);
    spec.density[i] = 1.0 + 0.25 * std::sin(2 * kPi * x[0]);
  }
  spec.density = normalize_mass(spec.density, 1.0);
  SolveParams p;
  Solution base = solve_ma(spec, p);
  std::mt19937 rng(9001);
  std::uniform_real_distribution<double> amp(-0.02, 0.02);
  for (int trial = 0; trial < 2; ++trial) {
    ScalarField warm(g);
    const double a1 = amp(rng), a2 = amp(rng);
    for (index_t i = 0; i < g.node_count(); ++i) {
      g.coordinates(i, x);
      warm[i] = a1 * std::cos(2 * kPi * x[0]) + a2 * std::sin(4 * kPi * x[0]);
    }
    p.warm_start = warm;
    Solution other = solve_ma(spec, p);
    for (index_t i = 0; i < g.node_count(); ++i)
      CHECK(std::abs(other.phi[i] - base.phi[i]) < 10.0 * p.residual_tol * 100);
  }
}

TEST_CASE("continuation path on the collapsing family (Prop 2 shape)") {
  PeriodicGrid g = build_grid(2, GridMode::Reduced, 32);
  ProblemSpec spec = flat_spec(g, 0);
  spec.chi = BackgroundForm(Herm::diag(1.0, 0.0));
  spec.kappa = 1;
  double x[2];
  for (index_t i = 0; i < g.node_count(); ++i) {
    g.coordinates(i, x);
    spec.density[i] = (1.0 + 0.2 * std::cos(2 * kPi * x[0])) * (1.0 + 0.05 * std::cos(2 * kPi * x[1]));
  }
  spec.density = normalize_mass(spec.density, 1.0);
  std::vector<double> ts = {1.0, 0.3, 0.1, 0.03, 0.01};
  ContinuationResult res = continuation_path(spec, ts, SolveParams{});
  REQUIRE(!res.failure.has_value());
  REQUIRE(res.solutions.size() == ts.size());
  std::vector<double> osc;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const Solution& s = res.solutions[k];
    CHECK(s.converged);
    CHECK(s.c_t == Catch::Approx(std::log(1.0 + ts[k])).margin(1e-10));
    osc.push_back(s.phi.sup() - s.phi.inf());
  }
  // uniform bound: oscillation stays within 1.5x of the t=1 value
  for (double o : osc) CHECK(o <= 1.5 * std::max(osc.front(), 1e-6));

  // warm start vs cold start agree at the final t
  ProblemSpec cold = spec;
  cold.t = 0.1;
  Solution c = solve_ma(cold, SolveParams{});
  const Solution& w = res.solutions[2];
  for (index_t i = 0; i < g.node_count(); ++i)
    CHECK(std::abs(c.phi[i] - w.phi[i]) < 1e-7);
}

TEST_CASE("manufactured family recovered along the path") {
  PeriodicGrid g = build_grid(1, GridMode::Reduced, 64);
  auto [psi, hess_psi] = cosine_star(g, 0.05);
  std::vector<double> ts = {1.0, 0.5, 0.25};
  for (double t : ts) {
    ProblemSpec spec = flat_spec(g, 1);
    spec.chi = BackgroundForm(Herm::identity(1));
    spec.kappa = 1;
    spec.t = t;
    ScalarField phi_t = psi;
    phi_t *= t;
    HermitianField ht(g);
    for (index_t i = 0; i < g.node_count(); ++i) ht.set(i, t * hess_psi.at(i));
    spec.density = manufactured_rhs(spec, phi_t, &ht);
    Solution sol = solve_ma(spec, SolveParams{});
    double err = 0.0;
    for (index_t i = 0; i < g.node_count(); ++i)
      err = std::max(err, std::abs(sol.phi[i] - phi_t[i]));
    const double h = g.spacing()[0];
    CHECK(err < 10.0 * h * h);
  }
}

TEST_CASE("t_min detection") {
  PeriodicGrid g = build_grid(2, GridMode::Reduced, 16);
  ProblemSpec spec = flat_spec(g, 1);
  spec.kappa = 2;  // neutral t^{n-kappa} scaling during detection
  SolveParams p;
  p.max_newton = 30;

  SECTION("non-nef chi hits the class positivity threshold") {
    spec.chi = BackgroundForm(Herm::diag(1.0, -0.25));
    const double tmin = detect_tmin(spec, p, 0.01);
    CHECK(tmin == Catch::Approx(0.25).margin(0.02));
  }
  SECTION("nef chi solves down to t = 0+") {
    spec.chi = BackgroundForm(Herm::diag(1.0, 0.0));
    CHECK(detect_tmin(spec, p, 0.01) == 0.0);
  }
  SECTION("chi = theta solves for all t") {
    spec.chi = BackgroundForm(Herm::identity(2));
    CHECK(detect_tmin(spec, p, 0.01) == 0.0);
  }
}

TEST_CASE("base limit solve") {
  PeriodicGrid base = build_grid(1, GridMode::Reduced, 64);
  BackgroundForm chi_base(Herm::identity(1));

  SECTION("constant F with lambda = 0 gives the flat base metric") {
    ScalarField f(base, 0.8);
    Solution sol = solve_base_limit(base, chi_base, f, 2, 0, SolveParams{});
    CHECK(sol.converged);
    CHECK(sol.phi.sup_abs() < 1e-9);
  }
  SECTION("mass check: total base volume equals the class volume") {
    ScalarField f(base);
    double x[1];
    for (index_t i = 0; i < base.node_count(); ++i) {
      base.coordinates(i, x);
      f[i] = 1.0 + 0.3 * std::cos(2 * kPi * x[0]);
    }
    Solution sol = solve_base_limit(base, chi_base, f, 2, 0, SolveParams{});
    ScalarField ones(base, 1.0);
    CHECK(integrate(det_field(sol.metric), ones) == Catch::Approx(1.0).epsilon(1e-9));
  }
  SECTION("lambda = 1 base equation balances its own mass") {
    ScalarField f(base, 1.0);
    Solution sol = solve_base_limit(base, chi_base, f, 2, 1, SolveParams{});
    // det(1 + hess phi) = 2 e^phi  =>  phi = -log 2 for constant F = 1
    CHECK(sol.phi[0] == Catch::Approx(-std::log(2.0)).margin(1e-9));
  }
}
