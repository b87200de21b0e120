#include <cmath>
#include <vector>

#include "doctest.h"
#include "dqm/diffusion.hpp"
#include "dqm/error.hpp"
#include "dqm/oracle.hpp"
#include "dqm/qpotential.hpp"

using namespace dqm;

namespace {

double l1_distance(std::span<const double> a, std::span<const double> b, double dx) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s * dx;
}

double free_energy(const SmoluchowskiSolver& s, const PotentialSpec& pot,
                   const PhysicalParams& p) {
  DensityField rho = s.density();
  std::vector<double> u(rho.grid().size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = rho[i] * pot.value(rho.grid().x(i));
  return integrate(u, rho.grid()) + fisher_mean_q(rho, p).mean_q;
}

}  // namespace

TEST_CASE("Gaussian variance rate") {
  PhysicalParams ground(1.0, 1.0, 0.0, 1.0);
  auto harmonic = PotentialSpec::harmonic(1.0, 1.0);
  CHECK(std::abs(gaussian_sigma_ode_rhs(0.5, ground, harmonic)) < 1e-15);
  CHECK(gaussian_sigma_ode_rhs(0.25, ground, harmonic) == doctest::Approx(1.5).epsilon(1e-14));
  PhysicalParams thermal(1.0, 1.0, 1.0, 1.0);
  CHECK(gaussian_sigma_ode_rhs(1.0, thermal, PotentialSpec::free()) ==
        doctest::Approx(2.5).epsilon(1e-14));
  CHECK_THROWS_AS(gaussian_sigma_ode_rhs(0.0, thermal, harmonic), InvalidArgument);
  CHECK_THROWS_AS(gaussian_sigma_ode_rhs(1.0, thermal.with_friction(0.0), harmonic),
                  InvalidArgument);
}

TEST_CASE("closed and implicit dispersion laws") {
  PhysicalParams p(1.0, 1.0, 0.0, 1.0);
  CHECK(dispersion_harmonic(0.25, p, 1.0) == doctest::Approx(0.39753004881032505).epsilon(1e-14));
  CHECK(dispersion_harmonic(0.0, p, 1.0) == 0.0);
  CHECK(dispersion_harmonic(60.0, p, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(dispersion_harmonic(1.0, p, 0.0), InvalidArgument);

  // lambda_T = 1 and D = 1.
  PhysicalParams q(1.0, 0.25, 0.25, 1.0);
  double s = dispersion_free_implicit(1.0, q);
  CHECK(std::abs(s - std::log1p(s) - 2.0) < 1e-12);
  CHECK(s == doctest::Approx(3.505241495792883).epsilon(1e-12));
  CHECK(dispersion_free_implicit(0.0, q) == 0.0);
  CHECK_THROWS_AS(dispersion_free_implicit(1.0, q.with_kT(0.0)), InvalidArgument);

  PhysicalParams hot(1.0, 1.0, 1e6, 1.0);
  for (double t : {1e-3, 0.1, 1.0, 10.0}) {
    double lam2 = std::pow(hot.lambda_thermal(), 2);
    if (lam2 < 1e-4 * 2.0 * hot.diffusion() * t) {
      CHECK(std::abs(dispersion_free_implicit(t, hot) / (2.0 * hot.diffusion() * t) - 1.0) < 1e-3);
    }
  }
}

TEST_CASE("closed forms solve the Gaussian variance equation") {
  PhysicalParams p(1.3, 0.7, 0.0, 0.9);
  double w = 1.4;
  auto pot = PotentialSpec::harmonic(p.mass(), w);
  double a = 4.0 * p.mass() * w * w / p.friction();
  double amp = p.hbar() / (2.0 * p.mass() * w);
  for (int k = 1; k <= 20; ++k) {
    double t = 0.05 * k;
    double e = std::exp(-a * t);
    double slope = amp * a * e / (2.0 * std::sqrt(1.0 - e));
    double s2 = dispersion_harmonic(t, p, w);
    // The rate is a difference of two O(1) terms; compare on their scale.
    double scale = 2.0 * pot.derivative(2, 0.0) * s2 / p.friction();
    CHECK(std::abs(slope - gaussian_sigma_ode_rhs(s2, p, pot)) < 1e-10 * scale);
  }
  PhysicalParams q(0.8, 1.5, 0.6, 1.1);
  double lam2 = std::pow(q.lambda_thermal(), 2);
  for (int k = 1; k <= 20; ++k) {
    double t = 0.1 * k;
    double s2 = dispersion_free_implicit(t, q);
    double slope = 2.0 * q.diffusion() * (lam2 + s2) / s2;
    CHECK(std::abs(slope - gaussian_sigma_ode_rhs(s2, q, PotentialSpec::free())) <
          1e-10 * slope);
  }
}

TEST_CASE("ground state is a fixed point of the quantum diffusion step") {
  PhysicalParams p(1.0, 1.0, 0.0, 1.0);
  auto pot = PotentialSpec::harmonic(1.0, 1.0);
  auto grid = build_grid(-8.0, 8.0, 256, Boundary::periodic);
  auto rho0 = gaussian_density(0.0, 0.5, grid);
  SmoluchowskiSolver solver(rho0, p, pot);
  double dt = solver.max_dt();
  for (int k = 0; k < 10000; ++k) {
    auto d = solver.step(dt);
    REQUIRE(d.mass_drift < 1e-12);
  }
  CHECK(l1_distance(solver.values(), rho0.values(), grid.dx()) < 1e-6);
}

TEST_CASE("narrow packet relaxes along the Gaussian variance curve") {
  PhysicalParams p(1.0, 1.0, 0.0, 1.0);
  auto pot = PotentialSpec::harmonic(1.0, 1.0);
  auto grid = build_grid(-6.0, 6.0, 256, Boundary::periodic);
  double s0 = 0.1;
  SmoluchowskiSolver solver(gaussian_density(0.0, s0, grid), p, pot);
  auto curve = oracle::gaussian_variance_curve(p, pot, s0);
  double f_prev = free_energy(solver, pot, p);
  for (int k = 1; k <= 10; ++k) {
    double t = 0.1 * k;
    solver.advance_to(t, solver.max_dt());
    solver.check_edges();
    CHECK(std::abs(solver.variance() / curve(t) - 1.0) < 0.01);
    double f = free_energy(solver, pot, p);
    CHECK(f <= f_prev + 1e-12);
    f_prev = f;
  }
  CHECK(solver.worst().mass_drift < 1e-12);
  CHECK(solver.worst().clip_mass < 1e-10);
}

TEST_CASE("classical limit follows the Einstein law") {
  PhysicalParams p(1.0, 1.0, 1.0, 0.0);
  auto grid = build_grid(-10.0, 10.0, 512, Boundary::periodic);
  double s0 = 0.25;
  SmoluchowskiSolver solver(gaussian_density(0.0, s0, grid), p, PotentialSpec::free());
  for (int k = 1; k <= 5; ++k) {
    double t = 0.1 * k;
    solver.advance_to(t, solver.max_dt());
    CHECK(std::abs(solver.variance() / (s0 + 2.0 * t) - 1.0) < 0.01);
  }
}

TEST_CASE("thermo-quantum free spreading matches the Gaussian variance curve") {
  PhysicalParams p(1.0, 1.0, 1.0, 1.0);
  auto grid = build_grid(-10.0, 10.0, 256, Boundary::periodic);
  double s0 = 0.3;
  SmoluchowskiSolver solver(gaussian_density(0.0, s0, grid), p, PotentialSpec::free());
  auto curve = oracle::gaussian_variance_curve(p, PotentialSpec::free(), s0);
  for (int k = 1; k <= 4; ++k) {
    double t = 0.1 * k;
    solver.advance_to(t, solver.max_dt());
    CHECK(std::abs(solver.variance() / curve(t) - 1.0) < 0.01);
  }
}

TEST_CASE("step preconditions") {
  auto grid = build_grid(-8.0, 8.0, 128, Boundary::periodic);
  auto rho = gaussian_density(0.0, 0.5, grid);
  auto pot = PotentialSpec::harmonic(1.0, 1.0);
  PhysicalParams p(1.0, 1.0, 0.0, 1.0);
  CHECK_THROWS_AS(step_smoluchowski(rho, p.with_friction(0.0), pot, 1e-6), InvalidArgument);
  double dt = smoluchowski_max_dt(grid, p, pot);
  CHECK_THROWS_AS(step_smoluchowski(rho, p, pot, 2.0 * dt), NumericalError);
  CHECK_NOTHROW(step_smoluchowski(rho, p, pot, dt));
  CHECK(dt <= 0.1 * 2.0 * p.mass() * p.friction() * std::pow(grid.dx(), 4) / 1.0);
  CHECK_THROWS_AS(step_nonlinear_smoluchowski(rho, p.with_kT(1.0), PotentialSpec::free(), 1e-6, 3),
                  InvalidArgument);
  CHECK_THROWS_AS(step_nonlinear_smoluchowski(rho, p, pot, 1e-6, 3), InvalidArgument);
  CHECK_THROWS_AS(step_nonlinear_smoluchowski(rho, p, pot, 1e-6, 0), InvalidArgument);
}

TEST_CASE("nonlinear Smoluchowski limits") {
  auto grid = build_grid(-8.0, 8.0, 128, Boundary::periodic);
  auto rho = gaussian_density(0.3, 0.4, grid);
  auto pot = PotentialSpec::harmonic(1.0, 1.0);
  PhysicalParams p(1.0, 1.0, 0.7, 1.0);
  double dt = smoluchowski_max_dt(grid, p, pot);
  auto a = step_nonlinear_smoluchowski(rho, p, pot, dt, 1);
  auto b = step_smoluchowski(rho, p, pot, dt);
  for (std::size_t i = 0; i < grid.size(); ++i) REQUIRE(a[i] == b[i]);

  PhysicalParams classical = p.with_hbar(0.0);
  double dtc = smoluchowski_max_dt(grid, classical, pot, {0.1, 4});
  auto c = step_nonlinear_smoluchowski(rho, classical, pot, dtc, 4);
  auto d = step_smoluchowski(rho, classical, pot, dtc);
  for (std::size_t i = 0; i < grid.size(); ++i) REQUIRE(c[i] == d[i]);
}

TEST_CASE("nonlinear Smoluchowski broadens the thermal equilibrium monotonically in hbar") {
  auto grid = build_grid(-9.0, 9.0, 144, Boundary::periodic);
  auto pot = PotentialSpec::harmonic(1.0, 1.0);
  double previous = 0.0;
  for (double h : {0.0, 0.5, 1.0}) {
    PhysicalParams p(1.0, 1.0, 1.0, h);
    SmoluchowskiSolver solver(gaussian_density(0.0, 1.0, grid), p, pot, {0.1, 5});
    solver.advance_to(6.0, solver.max_dt());
    double v = solver.variance();
    if (h == 0.0) {
      CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
    } else {
      CHECK(v > 1.0 + 1e-3);
      CHECK(v > previous);
    }
    previous = v;
  }
}

TEST_CASE("surrogate variance solves the stationary variance equation") {
  for (double h : {0.2, 1.0}) {
    PhysicalParams p(1.0, 1.0, 0.0, h);
    auto pot = PotentialSpec::harmonic(1.0, 1.3);
    for (double kt : {0.0, 0.3, 2.0}) {
      double s2 = surrogate_variance(kt, p, 1.3);
      CHECK(std::abs(gaussian_sigma_ode_rhs(s2, p.with_kT(kt), pot)) < 1e-12);
    }
  }
}
