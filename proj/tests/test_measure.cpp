#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mage/measure.hpp"

using namespace mage;

namespace {
constexpr double kPi = 3.14159265358979323846;

MeasureFamily pole_family(double alpha, double eps, int axes) {
  MeasureFamily fam;
  fam.kind = MeasureKind::SingularPole;
  fam.alpha = alpha;
  fam.epsilon = eps;
  fam.p = 2.0;
  fam.center.assign(axes, 0.5);
  return fam;
}
}  // namespace

TEST_CASE("smooth family with zero amplitude is the unit density") {
  PeriodicGrid g = build_grid(1, GridMode::Full, 16);
  MeasureFamily fam;
  fam.kind = MeasureKind::Smooth;
  ScalarField d = realize_density(fam, g);
  for (index_t i = 0; i < d.size(); ++i) CHECK(d[i] == Catch::Approx(1.0));
}

TEST_CASE("singular pole peak value matches the closed form") {
  PeriodicGrid g = build_grid(1, GridMode::Full, 64);
  MeasureFamily fam = pole_family(0.4, 0.1, 2);
  const double c = realized_constant(fam, g);
  const double sup = analytic_sup_density(fam, g);
  CHECK(sup == Catch::Approx(c * std::pow(0.01, -0.4)));
  // resolved regime: the node maximum sits within a few percent of the peak
  ScalarField d = realize_density(fam, g);
  CHECK(d.sup() > 0.8 * sup);
  CHECK(d.sup() <= sup * (1 + 1e-12));
}

TEST_CASE("family sweep: Lp stable, sup density grows like eps^-2alpha") {
  // measured with the 8x-refinement quadrature the family checks use
  PeriodicGrid work = build_grid(1, GridMode::Full, 64);
  const int refine = 8;
  std::vector<double> lp, sup;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    MeasureFamily fam = pole_family(0.4, eps, 2);
    DensityReport rep = density_report(fam, work, BackgroundForm(Herm::identity(1)), refine);
    lp.push_back(rep.lp_norm);
    sup.push_back(rep.sup_density);
    CHECK(rep.mass == Catch::Approx(1.0));
  }
  for (double v : lp) {
    CHECK(v / lp.front() < 1.25);
    CHECK(v / lp.front() > 0.75);
  }
  CHECK(sup.back() / sup.front() > 100.0);
  CHECK(sup.back() / sup.front() < 500.0);
}

TEST_CASE("lp_norm basics and refinement stability") {
  PeriodicGrid g = build_grid(1, GridMode::Full, 32);
  ScalarField ones(g, 1.0);
  CHECK(lp_norm(ones, 2.0) == Catch::Approx(1.0));
  CHECK(lp_norm(ones, 3.7) == Catch::Approx(1.0));
  ScalarField twos(g, 2.0);
  CHECK(lp_norm(twos, 2.0) == Catch::Approx(2.0));

  MeasureFamily fam = pole_family(0.4, 1e-3, 2);
  PeriodicGrid g128 = build_grid(1, GridMode::Full, 128);
  PeriodicGrid g256 = build_grid(1, GridMode::Full, 256);
  const double l1 = lp_norm(realize_density(fam, g128), 2.0);
  const double l2 = lp_norm(realize_density(fam, g256), 2.0);
  CHECK(std::abs(l2 - l1) / l1 < 0.05);
}

TEST_CASE("lp_norm is monotone in p for unit-mass densities") {
  PeriodicGrid g = build_grid(1, GridMode::Full, 32);
  MeasureFamily fam;
  fam.kind = MeasureKind::Smooth;
  fam.amplitudes = {0.8};
  fam.center = {0.1, 0.3};
  ScalarField d = realize_density(fam, g);
  double prev = 0.0;
  for (double p : {1.5, 2.0, 3.0, 5.0}) {
    const double v = lp_norm(d, p);
    CHECK(v >= prev - 1e-13);
    prev = v;
  }
}

TEST_CASE("ricci bounds of a constant density vanish") {
  PeriodicGrid g = build_grid(2, GridMode::Reduced, 16);
  ScalarField d(g, 3.7);
  auto [lo, hi] = ricci_bounds_of_measure(d, BackgroundForm(Herm::identity(2)));
  CHECK(lo == 0.0);
  CHECK(hi == 0.0);
}

TEST_CASE("ricci bounds of exp(a cos) match the symbolic Hessian") {
  const double a = 0.3;
  PeriodicGrid g = build_grid(1, GridMode::Reduced, 256);
  MeasureFamily fam;
  fam.kind = MeasureKind::Smooth;
  fam.amplitudes = {a};
  fam.center = {0.0};
  ScalarField d = realize_density(fam, g);
  auto [lo, hi] = ricci_bounds_of_measure(d, BackgroundForm(Herm::identity(1)));
  CHECK(lo == Catch::Approx(a * kPi * kPi).epsilon(1e-3));
  CHECK(hi == Catch::Approx(a * kPi * kPi).epsilon(1e-3));
  // theta-scale: doubling theta halves the bound
  auto [lo2, hi2] = ricci_bounds_of_measure(d, BackgroundForm(Herm{1, 2.0, 0, {0, 0}}));
  CHECK(lo2 == Catch::Approx(lo / 2.0));
  // analytic route agrees with the discrete one on this smooth family
  auto [alo, ahi] = analytic_ricci_bounds(fam, g, BackgroundForm(Herm::identity(1)));
  CHECK(alo == Catch::Approx(lo).epsilon(1e-3));
  CHECK(ahi == Catch::Approx(hi).epsilon(1e-3));
}

TEST_CASE("pole family: A_lower uniform across eps, A_upper blows up while resolved") {
  PeriodicGrid g = build_grid(1, GridMode::Full, 64);
  BackgroundForm theta(Herm::identity(1));
  std::vector<double> lower, upper;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    MeasureFamily fam = pole_family(0.4, eps, 2);
    auto [lo, hi] = analytic_ricci_bounds(fam, PeriodicGrid(1, GridMode::Full, {512}), theta);
    lower.push_back(lo);
    upper.push_back(hi);
  }
  for (double v : lower) CHECK(v < 2.0 * lower.front());
  CHECK(*std::max_element(upper.begin(), upper.end()) > 10.0 * upper.front());
}

TEST_CASE("normalize_mass basics and idempotence") {
  PeriodicGrid g = build_grid(1, GridMode::Reduced, 32);
  ScalarField twos(g, 2.0);
  ScalarField n1 = normalize_mass(twos, 1.0);
  CHECK(n1[0] == Catch::Approx(1.0));
  ScalarField n2 = normalize_mass(n1, 1.0);
  for (index_t i = 0; i < n1.size(); ++i) CHECK(n2[i] == n1[i]);

  MeasureFamily fam;
  fam.kind = MeasureKind::Smooth;
  fam.amplitudes = {0.4};
  fam.center = {0.25};
  ScalarField d = realize_density(fam, g);
  CHECK(integrate(d) == Catch::Approx(1.0).margin(1e-14));

  // normalization constant bounded across the eps sweep
  PeriodicGrid gf = build_grid(1, GridMode::Full, 64);
  double cmin = 1e300, cmax = 0;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double c = realized_constant(pole_family(0.4, eps, 2), gf);
    cmin = std::min(cmin, c);
    cmax = std::max(cmax, c);
  }
  CHECK(cmax / cmin < 5.0);
}

TEST_CASE("jacobian density of constant forms") {
  PeriodicGrid g = build_grid(2, GridMode::Reduced, 8);
  BackgroundForm chi(Herm::diag(1.0, 0.0));
  BackgroundForm theta(Herm::identity(2));
  ScalarField h1 = jacobian_density(chi, theta, 1, g);
  CHECK(h1[0] == Catch::Approx(1.0));

  ScalarField h2 = jacobian_density(theta, theta, 2, g);
  CHECK(h2[0] == Catch::Approx(1.0));

  BackgroundForm zero(Herm::zero(2));
  ScalarField h0 = jacobian_density(zero, theta, 1, g);
  CHECK(h0[0] == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("pushforward of a separable density is proportional to the base factor") {
  PeriodicGrid g = build_grid(2, GridMode::Reduced, 32);
  FibrationSplit split{1};
  PeriodicGrid base = base_grid_of(g, split);
  ScalarField dens(g);
  double x[2];
  for (index_t i = 0; i < g.node_count(); ++i) {
    g.coordinates(i, x);
    dens[i] = (1.0 + 0.3 * std::cos(2 * kPi * x[0])) * (1.0 + 0.2 * std::sin(2 * kPi * x[1]));
  }
  BackgroundForm chi(Herm::diag(1.0, 0.0));
  ScalarField f = pushforward_density(dens, split, chi, base);
  double xb[1];
  for (index_t b = 0; b < base.node_count(); ++b) {
    base.coordinates(b, xb);
    CHECK(f[b] == Catch::Approx(1.0 + 0.3 * std::cos(2 * kPi * xb[0])).margin(1e-12));
  }

  // unit density, identity base block: F = fiber volume (= 1 on the unit torus)
  ScalarField ones(g, 1.0);
  ScalarField fv = pushforward_density(ones, split, chi, base);
  CHECK(fv[0] == Catch::Approx(1.0));

  // mass preservation: integral of F * det(chi base) over base = integral of density
  ScalarField det_base(base, 1.0);
  CHECK(integrate(f, det_base) == Catch::Approx(integrate(dens)).margin(1e-12));
}

TEST_CASE("config rule: alpha p >= 1 rejected for n = 1") {
  PeriodicGrid g = build_grid(1, GridMode::Full, 16);
  MeasureFamily fam = pole_family(0.6, 0.1, 2);
  fam.p = 2.0;  // alpha p = 1.2
  CHECK_THROWS_AS(realize_density(fam, g), ConfigError);
}
