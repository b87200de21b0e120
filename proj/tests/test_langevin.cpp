#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "dqm/error.hpp"
#include "dqm/langevin.hpp"
#include "dqm/oracle.hpp"

using namespace dqm;

namespace {

double sample_variance(const std::vector<double>& a) {
  double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  double ss = 0.0;
  for (double v : a) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(a.size() - 1);
}

double sample_mean(const std::vector<double>& a) {
  return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
}

ForceModel harmonic_model(bool thermal, QuantumForceMode quantum = QuantumForceMode::none) {
  ForceModel model;
  model.thermal = thermal;
  model.quantum = quantum;
  model.potential = PotentialSpec::harmonic(1.0, 1.0);
  return model;
}

}  // namespace

TEST_CASE("philox known-answer vectors") {
  using A = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                   {0xffffffffu, 0xffffffffu}) ==
        A{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                   {0xa4093822u, 0x299f31d0u}) ==
        A{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("philox normals have unit moments and are reproducible") {
  const std::size_t n = 100000;
  std::vector<double> z;
  z.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    auto pair = philox_normals(7, i, 3);
    z.push_back(pair[0]);
    z.push_back(pair[1]);
  }
  const double se = 1.0 / std::sqrt(static_cast<double>(z.size()));
  CHECK(std::abs(sample_mean(z)) < 4.0 * se);
  CHECK(std::abs(sample_variance(z) - 1.0) < 4.0 * std::sqrt(2.0) * se);
  CHECK(philox_normals(7, 11, 3) == philox_normals(7, 11, 3));
  CHECK(philox_normals(7, 11, 3) != philox_normals(8, 11, 3));
  CHECK(philox_normals(7, 11, 3) != philox_normals(7, 12, 3));
  CHECK(philox_normals(7, 11, 3) != philox_normals(7, 11, 4));
}

TEST_CASE("wigner sampling of Gaussian phase-space densities") {
  const PhysicalParams params(1.0, 0.0, 0.0, 1.0);
  const auto gs = GaussianPhaseSpec::ground_state(params, 1.0);
  CHECK(gs.var_x == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(gs.var_v == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(gs.cov_xv == 0.0);

  const std::size_t n = 10000;
  const double tol = 4.0 / std::sqrt(static_cast<double>(n));
  auto ens = sample_wigner_initial(gs, n, 42);
  CHECK(ens.size() == n);
  CHECK(std::abs(sample_variance(ens.x) / 0.5 - 1.0) < tol);
  CHECK(std::abs(sample_variance(ens.v) / 0.5 - 1.0) < tol);

  GaussianPhaseSpec spec{1.5, 2.0, -0.5, 0.3, 0.4};
  auto corr = sample_wigner_initial(spec, n, 9);
  CHECK(std::abs(sample_mean(corr.x) - 1.5) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(sample_mean(corr.v) + 0.5) < 4.0 * std::sqrt(0.3 / n));
  CHECK(std::abs(sample_variance(corr.x) / 2.0 - 1.0) < tol);
  CHECK(std::abs(sample_variance(corr.v) / 0.3 - 1.0) < tol);
  double cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) cov += (corr.x[i] - 1.5) * (corr.v[i] + 0.5);
  cov /= static_cast<double>(n);
  CHECK(std::abs(cov - 0.4) < 4.0 * std::sqrt((2.0 * 0.3 + 0.16) / n));

  auto fixed = sample_wigner_initial({0.7, 0.0, -0.2, 0.0, 0.0}, 200, 1);
  CHECK(std::all_of(fixed.x.begin(), fixed.x.end(), [](double x) { return x == 0.7; }));
  CHECK(std::all_of(fixed.v.begin(), fixed.v.end(), [](double v) { return v == -0.2; }));

  CHECK_THROWS_AS(sample_wigner_initial({0.0, 1.0, 0.0, 1.0, 1.5}, 10, 1), InvalidArgument);
  CHECK_THROWS_AS(sample_wigner_initial({0.0, -1.0, 0.0, 1.0, 0.0}, 10, 1), InvalidArgument);
  CHECK_THROWS_AS(GaussianPhaseSpec::ground_state(params, 0.0), InvalidArgument);
}

TEST_CASE("trajectories do not depend on particle order") {
  const PhysicalParams params(1.0, 0.5, 1.0, 1.0);
  auto a = sample_wigner_initial(GaussianPhaseSpec::ground_state(params, 1.0), 500, 3);
  auto b = a;
  std::reverse(b.x.begin(), b.x.end());
  std::reverse(b.v.begin(), b.v.end());
  std::reverse(b.stream.begin(), b.stream.end());
  const auto model = harmonic_model(true);
  for (int s = 0; s < 50; ++s) {
    advance_ensemble(a, params, model, 0.01);
    advance_ensemble(b, params, model, 0.01);
  }
  bool identical = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::size_t j = a.size() - 1 - i;
    identical = identical && a.x[i] == b.x[j] && a.v[i] == b.v[j];
  }
  CHECK(identical);
  auto c = step_ensemble(a, params, model, 0.01);
  CHECK(c.steps == a.steps + 1);
  CHECK(c.x != a.x);
}

TEST_CASE("thermal harmonic ensemble reaches equipartition and the MB histogram") {
  const PhysicalParams params(1.0, 1.0, 1.0, 1.0);
  const std::size_t n = 100000;
  auto ens = sample_wigner_initial({0.5, 0.6, 0.3, 0.6, 0.0}, n, 2024);
  const auto model = harmonic_model(true);
  const double dt = 0.005;
  for (int s = 0; s < 1400; ++s) advance_ensemble(ens, params, model, dt);
  const double vx = sample_variance(ens.x);
  const double vv = sample_variance(ens.v);
  CHECK(std::abs(vx - 1.0) < 3.0 * variance_standard_error(ens.x));
  CHECK(std::abs(vv - 1.0) < 3.0 * variance_standard_error(ens.v));

  const PhaseSpaceGrid grid(build_grid(-10.0, 10.0, 64, Boundary::periodic), 64, 10.0);
  const auto st = ensemble_statistics(ens, params, grid);
  REQUIRE(st.histogram.has_value());
  CHECK(st.histogram->total() == doctest::Approx(1.0).epsilon(1e-12));
  const auto mb = maxwell_boltzmann_field(grid, params, model.potential);
  double l1 = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k)
    l1 += std::abs(st.histogram->values()[k] - mb.values()[k]);
  l1 *= grid.x_grid().dx() * grid.dp();
  CHECK(l1 < 0.05);
}

TEST_CASE("noise-free damped ensemble follows the classical ODE to first order") {
  const PhysicalParams params(1.0, 0.2, 0.0, 1.0);
  const auto exact = oracle::damped_oscillator_mean(params, 1.0, 1.0, 0.0);
  const auto model = harmonic_model(false);
  auto error_at = [&](double dt) {
    auto ens = sample_wigner_initial({1.0, 0.0, 0.0, 0.0, 0.0}, 100, 5);
    const int steps = static_cast<int>(std::lround(5.0 / dt));
    for (int s = 0; s < steps; ++s) advance_ensemble(ens, params, model, dt);
    double worst = 0.0;
    for (double x : ens.x) worst = std::max(worst, std::abs(x - exact(5.0)));
    CHECK(std::all_of(ens.x.begin(), ens.x.end(), [&](double x) { return x == ens.x[0]; }));
    return worst;
  };
  const double e1 = error_at(0.01);
  const double e2 = error_at(0.005);
  CHECK(e1 < 0.02);
  CHECK(std::log2(e1 / e2) == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("quadratic-exact mode keeps the ground-state width") {
  const PhysicalParams params(1.0, 0.0, 0.0, 1.0);
  const std::size_t n = 100000;
  auto ens = sample_wigner_initial(GaussianPhaseSpec::ground_state(params, 1.0), n, 77);
  const auto model = harmonic_model(false);
  const double dt = 0.002;
  for (int k = 1; k <= 10; ++k) {
    for (int s = 0; s < 314; ++s) advance_ensemble(ens, params, model, dt);
    CHECK(std::abs(sample_variance(ens.x) - 0.5) < 3.0 * variance_standard_error(ens.x));
  }
  const auto st = ensemble_statistics(ens, params);
  CHECK(st.var_v == doctest::Approx(0.5).epsilon(0.02));
  for (const auto& bin : st.velocity_field) {
    if (bin.undersampled) continue;
    CHECK(std::abs(bin.mean_v) < 5.0 * std::sqrt(0.5 / static_cast<double>(bin.count)));
  }
}

TEST_CASE("velocity field of a drifting ensemble") {
  const PhysicalParams params(1.0, 0.0, 0.0, 1.0);
  auto ens = sample_wigner_initial({0.0, 1.0, 0.8, 0.0, 0.0}, 5000, 1);
  const auto st = ensemble_statistics(ens, params, std::nullopt, 16);
  REQUIRE(st.velocity_field.size() == 16);
  for (const auto& bin : st.velocity_field)
    if (bin.count > 0) CHECK(bin.mean_v == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(std::any_of(st.velocity_field.begin(), st.velocity_field.end(),
                    [](const VelocityBin& b) { return b.undersampled; }));
  auto small = sample_wigner_initial({0.0, 1.0, 0.0, 1.0, 0.0}, 50, 1);
  CHECK_THROWS_AS(ensemble_statistics(small, params), InvalidArgument);
}

TEST_CASE("mean-field quantum force of a Gaussian ensemble") {
  const PhysicalParams params(1.0, 0.0, 0.0, 1.0);
  const std::size_t n = 100000;
  auto ens = sample_wigner_initial({0.0, 1.0, 0.0, 0.0, 0.0}, n, 11);

  // The estimator targets the force of the kernel-smoothed Gaussian, variance 1 + h^2.
  const double h = 0.7;
  const double smoothed = 1.0 / (4.0 * (1.0 + h * h) * (1.0 + h * h));
  const double direct = meanfield_quantum_force_at(ens, params, h, 1.0);
  CHECK(std::abs(direct / smoothed - 1.0) < 0.1);

  auto probe = ens;
  probe.x.push_back(1.0);
  probe.v.push_back(0.0);
  probe.stream.push_back(n);
  const auto mf = meanfield_quantum_force(probe, params, Bandwidth::fixed(h));
  CHECK(mf.bandwidth == h);
  CHECK(mf.extrapolated == 0);
  CHECK(mf.force.back() == doctest::Approx(meanfield_quantum_force_at(probe, params, h, 1.0))
                               .epsilon(0.01));

  const auto silverman = meanfield_quantum_force(ens, params, Bandwidth::silverman());
  CHECK(silverman.bandwidth ==
        doctest::Approx(1.06 * std::sqrt(sample_variance(ens.x)) * std::pow(1e5, -0.2)));

  auto sym = ens;
  for (std::size_t i = 0; i < n; ++i) sym.x[i] = (i % 2 == 0) ? ens.x[i] : -ens.x[i - 1];
  CHECK(std::abs(meanfield_quantum_force_at(sym, params, h, 0.0)) < 1e-10);

  auto flat = sample_wigner_initial({0.3, 0.0, 0.0, 1.0, 0.0}, 2000, 1);
  CHECK_THROWS_AS(meanfield_quantum_force(flat, params, Bandwidth::silverman()), NumericalError);
  auto few = sample_wigner_initial({0.0, 1.0, 0.0, 0.0, 0.0}, 500, 1);
  CHECK_THROWS_AS(meanfield_quantum_force(few, params, Bandwidth::silverman()), InvalidArgument);
}

TEST_CASE("mean-field ground state is a damped fixed point with zero-mean quantum force") {
  const PhysicalParams params(1.0, 4.0, 0.0, 1.0);
  const std::size_t n = 10000;
  const double h = 0.5;
  // Kernel-smoothed width sigma^2 + h^2 equals the ground-state width hbar/(2 m w0).
  const double target = 0.5 - h * h;
  auto ens = sample_wigner_initial({0.0, target, 0.0, 0.0, 0.0}, n, 21);
  auto model = harmonic_model(false, QuantumForceMode::meanfield);
  model.bandwidth = Bandwidth::fixed(h);
  bool zero_mean = true;
  for (int s = 0; s < 1000; ++s) {
    advance_ensemble(ens, params, model, 0.005);
    zero_mean = zero_mean && std::abs(ens.diagnostics.quantum_force_mean) <
                                 3.0 * ens.diagnostics.quantum_force_stderr;
  }
  CHECK(zero_mean);
  CHECK(ens.diagnostics.kde_extrapolated == 0);
  CHECK(std::abs(sample_variance(ens.x) - target) < 3.0 * variance_standard_error(ens.x));
}

TEST_CASE("ensemble preconditions and CSV export") {
  const PhysicalParams cold(1.0, 0.0, 1.0, 1.0);
  auto ens = sample_wigner_initial({0.0, 1.0, 0.0, 1.0, 0.0}, 3, 1);
  CHECK_THROWS_AS(advance_ensemble(ens, cold, harmonic_model(true), 0.01), InvalidArgument);
  CHECK_THROWS_AS(advance_ensemble(ens, cold, harmonic_model(false), 0.0), InvalidArgument);
  std::ostringstream out;
  write_ensemble_csv(out, ens);
  const std::string text = out.str();
  CHECK(text.rfind("id,x,v\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}
