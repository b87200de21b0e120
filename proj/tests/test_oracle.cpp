#include <cmath>

#include "doctest.h"
#include "dqm/error.hpp"
#include "dqm/oracle.hpp"

using namespace dqm;

TEST_CASE("commutator factor equals the trace formula") {
  PhysicalParams p(1.0, 1.0, 0.0, 1.0);
  for (double w : {0.0, 0.5, 1.0, 3.0}) {
    auto pot = PotentialSpec::harmonic(1.0, w);
    CHECK(std::abs(oracle::commutator_factor(p, pot, 1.0) - 0.36787944117144233) < 1e-10);
  }
  CHECK(oracle::commutator_factor(p, PotentialSpec::free(), 0.0) == 1.0);
  PhysicalParams undamped(2.0, 0.0, 0.0, 1.0);
  for (double t : {0.5, 3.0, 10.0})
    CHECK(std::abs(oracle::commutator_factor(undamped, PotentialSpec::harmonic(2.0, 1.7), t) - 1.0) < 1e-10);
  CHECK_THROWS_AS(oracle::commutator_factor(p, PotentialSpec::quartic(1.0), 1.0), InvalidArgument);
}

TEST_CASE("closed-form dispersion references") {
  PhysicalParams p(1.0, 1.0, 0.0, 1.0);
  CHECK(oracle::free_quantum_dispersion(4.0, p) == doctest::Approx(2.0));
  CHECK(oracle::free_quantum_dispersion(0.0, p) == 0.0);
  CHECK(oracle::einstein_dispersion(3.0, PhysicalParams(1.0, 1.0, 1.0, 1.0)) == doctest::Approx(6.0));
  CHECK(oracle::einstein_dispersion(0.0, PhysicalParams(1.0, 1.0, 1.0, 1.0)) == 0.0);
  CHECK(oracle::einstein_dispersion(1.0, PhysicalParams(1.0, 4.0, 2.0, 1.0)) == doctest::Approx(1.0));
}

TEST_CASE("equilibrium references") {
  auto pot = PotentialSpec::harmonic(1.0, 1.0);
  auto refs = oracle::equilibrium_references(PhysicalParams(1.0, 1.0, 1.0, 1.0), pot);
  CHECK(refs.ground_sigma2 == doctest::Approx(0.5));
  CHECK(refs.classical_sigma2 == doctest::Approx(1.0));
  // MB density is normalized: crude 2D midpoint quadrature.
  double sum = 0.0;
  const double h = 0.05;
  for (double x = -10.0; x < 10.0; x += h)
    for (double q = -10.0; q < 10.0; q += h) sum += refs.mb_phase_density(x + 0.5 * h, q + 0.5 * h);
  CHECK(sum * h * h == doctest::Approx(1.0).epsilon(1e-8));

  auto cold = oracle::equilibrium_references(PhysicalParams(1.0, 1.0, 0.0, 1.0), pot);
  CHECK_THROWS_AS(cold.mb_phase_density(0.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(oracle::equilibrium_references(PhysicalParams(1.0, 1.0, 1.0, 1.0), PotentialSpec::quartic(1.0)),
                  InvalidArgument);
}

TEST_CASE("MB density is annihilated by the Klein-Kramers operator") {
  std::vector<double> xs, ps;
  for (int i = -40; i <= 40; ++i) {
    xs.push_back(0.1 * i);
    ps.push_back(0.1 * i);
  }
  PhysicalParams p(1.3, 0.7, 0.9, 1.0);
  CHECK(oracle::mb_kramers_residual(p, PotentialSpec::harmonic(1.3, 1.1), xs, ps) < 1e-10);
  CHECK(oracle::mb_kramers_residual(p, PotentialSpec::quartic(0.25), xs, ps) < 1e-10);
}

TEST_CASE("Gaussian variance curve reproduces the harmonic closed form") {
  // From s0 = closed form at t0 the ODE solution is the closed form shifted by t0.
  PhysicalParams p(1.0, 1.0, 0.0, 1.0);
  auto pot = PotentialSpec::harmonic(1.0, 1.0);
  auto closed = [](double t) { return 0.5 * std::sqrt(1.0 - std::exp(-4.0 * t)); };
  const double t0 = 0.05;
  auto curve = oracle::gaussian_variance_curve(p, pot, closed(t0));
  for (double t : {0.1, 0.5, 1.0, 2.0}) CHECK(std::abs(curve(t) - closed(t + t0)) < 1e-10);
  CHECK_THROWS_AS(oracle::gaussian_variance_curve(p, pot, 0.0), InvalidArgument);
}

TEST_CASE("Gaussian variance curve reproduces free quantum diffusion") {
  PhysicalParams p(1.0, 1.0, 0.0, 1.0);
  auto curve = oracle::gaussian_variance_curve(p, PotentialSpec::free(), 1.0);  // sqrt(t0) = 1 at t0 = 1
  for (double t : {0.5, 1.0, 3.0}) CHECK(std::abs(curve(t) - std::sqrt(t + 1.0)) < 1e-10);
}

TEST_CASE("damped oscillator mean") {
  PhysicalParams p(1.0, 0.2, 0.0, 1.0);
  auto x = oracle::damped_oscillator_mean(p, 1.0, 1.0, 0.0);
  const double g = 0.1, wd = std::sqrt(1.0 - g * g);
  for (double t : {0.3, 2.0, 10.0, 25.0}) {
    const double exact = std::exp(-g * t) * (std::cos(wd * t) + g / wd * std::sin(wd * t));
    CHECK(std::abs(x(t) - exact) < 1e-10);
  }
}
