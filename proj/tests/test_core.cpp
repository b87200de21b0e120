#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "dqm/core.hpp"
#include "dqm/error.hpp"

using namespace dqm;
using std::numbers::pi;

TEST_CASE("build_grid spacing and preconditions") {
  auto g = build_grid(-8.0, 8.0, 16, Boundary::periodic);
  CHECK(g.dx() == doctest::Approx(1.0));
  CHECK(g.x(0) == -8.0);
  CHECK(g.x(15) == doctest::Approx(7.0));

  auto c = build_grid(0.0, 1.0, 8, Boundary::clamped);
  CHECK(c.dx() == doctest::Approx(1.0 / 7.0));
  CHECK(c.x(7) == doctest::Approx(1.0));

  CHECK_THROWS_AS(build_grid(-8.0, 8.0, 7, Boundary::periodic), InvalidArgument);
  CHECK_THROWS_AS(build_grid(1.0, 1.0, 16, Boundary::periodic), InvalidArgument);
  CHECK_THROWS_AS(build_grid(0.0, INFINITY, 16, Boundary::periodic), InvalidArgument);
  CHECK_THROWS_AS(build_grid(NAN, 1.0, 16, Boundary::clamped), InvalidArgument);
}

TEST_CASE("physical params derived quantities") {
  PhysicalParams p(1.0, 4.0, 2.0, 1.0);
  CHECK(p.diffusion() == doctest::Approx(0.5));
  CHECK(p.lambda_thermal() == doctest::Approx(1.0 / (2.0 * std::sqrt(2.0))));
  CHECK_THROWS_AS(PhysicalParams(1.0, 0.0, 1.0, 1.0).diffusion(), InvalidArgument);
  CHECK_THROWS_AS(PhysicalParams(1.0, 1.0, 0.0, 1.0).lambda_thermal(), InvalidArgument);
  CHECK_THROWS_AS(PhysicalParams(0.0, 1.0, 1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(PhysicalParams(1.0, -1.0, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("potential derivatives are exact") {
  auto h = PotentialSpec::harmonic(2.0, 3.0);
  for (double x : {-1.5, 0.0, 0.7}) CHECK(h.value(x) == doctest::Approx(0.5 * 2.0 * 9.0 * x * x));
  CHECK(h.harmonic_frequency(2.0) == doctest::Approx(3.0));
  CHECK(h.degree() == 2);
  CHECK(h.derivative(3, 1.2) == 0.0);

  auto q = PotentialSpec::quartic(0.25);
  CHECK(q.derivative(1, 2.0) == doctest::Approx(8.0));
  CHECK(q.derivative(3, 2.0) == doctest::Approx(12.0));
  CHECK(q.derivative(4, -5.0) == doctest::Approx(6.0));
  CHECK(q.derivative(5, 1.0) == 0.0);
  CHECK(PotentialSpec::free().degree() == 0);
  CHECK(PotentialSpec::free().value(3.0) == 0.0);

  auto dw = PotentialSpec::double_well(1.0, 2.0);
  CHECK(dw.derivative(1, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("gaussian_density normalization and moments") {
  auto g = build_grid(-12.0, 12.0, 256, Boundary::periodic);
  auto rho = gaussian_density(0.0, 1.0, g);
  CHECK(integrate(rho.values(), g) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(rho.max() == doctest::Approx(1.0 / std::sqrt(2.0 * pi)).epsilon(1e-8));
  auto m = moments(rho);
  CHECK(std::abs(m.mean) < 1e-9);
  CHECK(std::abs(m.variance - 1.0) < 1e-6);

  auto m2 = moments(gaussian_density(0.0, 0.25, g));
  CHECK(std::abs(m2.variance - 0.25) < 1e-6);

  auto m3 = moments(gaussian_density(2.0, 0.5, g));
  CHECK(std::abs(m3.mean - 2.0) < 1e-9);
  CHECK(std::abs(m3.variance - 0.5) < 1e-8);

  auto gc = build_grid(-12.0, 12.0, 257, Boundary::clamped);
  auto m4 = moments(gaussian_density(0.5, 1.0, gc));
  CHECK(std::abs(m4.mean - 0.5) < 1e-9);
  CHECK(std::abs(m4.variance - 1.0) < 1e-6);

  CHECK_THROWS_AS(gaussian_density(0.0, 0.0, g), InvalidArgument);
  CHECK_THROWS_AS(gaussian_density(0.0, -1.0, g), InvalidArgument);
  // sigma = 3 on [-12, 12): edge at 4 sigma is far above 1e-12 of the peak.
  CHECK_THROWS_AS(gaussian_density(0.0, 9.0, g), InvalidArgument);
}

TEST_CASE("narrow Gaussian variance converges monotonically with n") {
  double previous = INFINITY;
  for (std::size_t n : {9u, 13u, 17u, 25u, 33u}) {
    auto g = build_grid(-1.0, 1.0, n, Boundary::clamped);
    auto m = moments(gaussian_density(0.0, 0.01, g));
    const double err = std::abs(m.variance - 0.01);
    CHECK((err <= previous || err < 1e-15));
    previous = err;
  }
  CHECK(previous < 1e-9);
}

TEST_CASE("moments rejects non-normalized densities") {
  auto g = build_grid(-12.0, 12.0, 128, Boundary::periodic);
  auto rho = gaussian_density(0.0, 1.0, g);
  std::vector<double> twice(rho.values().begin(), rho.values().end());
  for (auto& v : twice) v *= 2.0;
  CHECK_THROWS_AS(moments(twice, g), InvalidArgument);
  CHECK_THROWS_AS(DensityField(g, twice), InvalidArgument);
}

TEST_CASE("normalize reports the prior norm and is idempotent") {
  auto g = build_grid(-12.0, 12.0, 128, Boundary::periodic);
  auto rho = gaussian_density(0.0, 1.0, g);
  std::vector<double> twice(rho.values().begin(), rho.values().end());
  for (auto& v : twice) v *= 2.0;
  auto n1 = normalize(g, twice);
  CHECK(n1.norm == doctest::Approx(2.0).epsilon(1e-12));
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(n1.field[i] - rho[i]) < 1e-14);

  auto n2 = normalize(n1.field);
  CHECK(std::abs(n2.norm - 1.0) < 1e-12);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(n2.field[i] - n1.field[i]) < 1e-14);

  CHECK_THROWS_AS(normalize(g, std::vector<double>(g.size(), 0.0)), InvalidArgument);

  std::vector<cplx> psi(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) psi[i] = 3.0 * std::sqrt(rho[i]) * cplx(0.6, 0.8);
  auto np = normalize(g, psi);
  CHECK(np.norm == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(integrate(np.field.density(), g) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("spectral derivative of a single Fourier mode") {
  auto g = build_grid(0.0, 3.0, 64, Boundary::periodic);
  const double k = 2.0 * pi / g.length();
  std::vector<double> f(g.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::sin(k * g.x(i));
  auto d1 = derivative(f, 1, g);
  auto d3 = derivative(f, 3, g);
  double e1 = 0.0, e3 = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    e1 = std::max(e1, std::abs(d1[i] - k * std::cos(k * g.x(i))));
    e3 = std::max(e3, std::abs(d3[i] + k * k * k * std::cos(k * g.x(i))));
  }
  CHECK(e1 < 1e-10);
  CHECK(e3 < 1e-10);

  std::vector<double> constant(g.size(), 4.2);
  for (double v : derivative(constant, 2, g)) CHECK(std::abs(v) < 1e-12);
  CHECK_THROWS_AS(derivative(constant, 0, g), InvalidArgument);
}

TEST_CASE("clamped finite differences") {
  auto g = build_grid(-1.0, 2.0, 33, Boundary::clamped);
  std::vector<double> sq(g.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = g.x(i) * g.x(i);
  auto d = derivative(sq, 1, g);
  for (std::size_t i = 0; i < sq.size(); ++i) CHECK(d[i] == doctest::Approx(2.0 * g.x(i)));
  auto dd = derivative(sq, 2, g);
  for (double v : dd) CHECK(v == doctest::Approx(2.0));
  std::vector<double> constant(g.size(), -1.0);
  for (double v : derivative(constant, 2, g)) CHECK(std::abs(v) < 1e-9);

  // Interior error of a smooth non-polynomial field decays at least as dx^2.
  auto max_err = [](std::size_t n) {
    auto gr = build_grid(0.0, 2.0, n, Boundary::clamped);
    std::vector<double> f(n);
    for (std::size_t i = 0; i < n; ++i) f[i] = std::sin(3.0 * gr.x(i));
    auto df = derivative(f, 1, gr);
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) e = std::max(e, std::abs(df[i] - 3.0 * std::cos(3.0 * gr.x(i))));
    return e;
  };
  const double order = std::log2(max_err(65) / max_err(129));
  CHECK(order >= 2.0);
}

TEST_CASE("derivative is linear") {
  auto g = build_grid(-10.0, 10.0, 128, Boundary::periodic);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  std::vector<double> f(g.size()), h(g.size()), comb(g.size());
  for (int trial = 0; trial < 5; ++trial) {
    const double a = nd(rng), b = nd(rng);
    for (std::size_t i = 0; i < f.size(); ++i) {
      f[i] = std::exp(-0.3 * (g.x(i) - nd(rng) * 0.01) * g.x(i)) ;
      h[i] = std::cos(g.x(i)) * std::exp(-0.1 * g.x(i) * g.x(i));
      comb[i] = a * f[i] + b * h[i];
    }
    for (int order : {1, 2, 3}) {
      auto df = derivative(f, order, g), dh = derivative(h, order, g), dc = derivative(comb, order, g);
      double scale = 0.0, err = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) {
        scale = std::max(scale, std::abs(dc[i]));
        err = std::max(err, std::abs(dc[i] - (a * df[i] + b * dh[i])));
      }
      CHECK(err <= 1e-12 * std::max(1.0, scale));
    }
  }
}
