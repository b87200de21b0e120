#include "dqm/oracle.hpp"

#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <numbers>

#include "dqm/error.hpp"

namespace dqm::oracle {

namespace odeint = boost::numeric::odeint;

namespace {

constexpr double kTol = 1e-13;

template <typename State, typename System>
State integrate_to(System system, State state, double t) {
  if (t <= 0.0) return state;
  auto stepper = odeint::make_controlled(kTol, kTol, odeint::runge_kutta_dopri5<State>());
  odeint::integrate_adaptive(stepper, system, state, 0.0, t, std::min(1e-3, t));
  return state;
}

double omega_of(const PotentialSpec& pot, const PhysicalParams& params) {
  if (pot.degree() > 2)
    throw InvalidArgument("oracle requires a free or harmonic potential (degree <= 2)");
  return pot.harmonic_frequency(params.mass());
}

}  // namespace

double commutator_factor(const PhysicalParams& params, const PotentialSpec& pot, double t) {
  if (t < 0.0) throw InvalidArgument("time must be >= 0");
  const double w = omega_of(pot, params);
  const double gamma = params.friction() / params.mass();
  using State = std::array<double, 4>;  // row-major 2x2 transition matrix
  auto rhs = [w, gamma](const State& m, State& dm, double) {
    // dM/dt = A M with A = [[0, 1], [-w^2, -gamma]]
    dm[0] = m[2];
    dm[1] = m[3];
    dm[2] = -w * w * m[0] - gamma * m[2];
    dm[3] = -w * w * m[1] - gamma * m[3];
  };
  const State m = integrate_to(rhs, State{1.0, 0.0, 0.0, 1.0}, t);
  return m[0] * m[3] - m[1] * m[2];
}

double commutator_factor_closed_form(const PhysicalParams& params, double t) {
  return std::exp(-params.friction() * t / params.mass());
}

double free_quantum_dispersion(double t, const PhysicalParams& params) {
  if (t < 0.0) throw InvalidArgument("time must be >= 0");
  if (params.friction() <= 0.0) throw InvalidArgument("free quantum diffusion requires b > 0");
  return params.hbar() * std::sqrt(t / (params.mass() * params.friction()));
}

double einstein_dispersion(double t, const PhysicalParams& params) {
  if (t < 0.0) throw InvalidArgument("time must be >= 0");
  return 2.0 * params.diffusion() * t;
}

EquilibriumReferences equilibrium_references(const PhysicalParams& params,
                                             const PotentialSpec& pot) {
  const double w = omega_of(pot, params);
  if (w <= 0.0) throw InvalidArgument("equilibrium references require omega0 > 0");
  const double m = params.mass();
  EquilibriumReferences out;
  out.ground_sigma2 = params.hbar() / (2.0 * m * w);
  if (params.kT() > 0.0) {
    const double kT = params.kT();
    out.classical_sigma2 = kT / (m * w * w);
    // Z = (2 pi m kT)^(1/2) (2 pi kT / (m w^2))^(1/2); linear terms shift the
    // minimum, which the normalization absorbs via U(x) - U_min.
    const double two_pi = 2.0 * std::numbers::pi;
    const double z = std::sqrt(two_pi * m * kT) * std::sqrt(two_pi * kT / (m * w * w));
    const auto& c = pot.coefficients();
    const double c1 = c.size() > 1 ? c[1] : 0.0;
    const double c2 = c.size() > 2 ? c[2] : 0.0;
    const double u_min = pot.value(-c1 / (2.0 * c2));
    out.mb_phase_density = [pot, m, kT, z, u_min](double x, double p) {
      return std::exp(-(p * p / (2.0 * m) + pot.value(x) - u_min) / kT) / z;
    };
  } else {
    out.classical_sigma2 = 0.0;
    out.mb_phase_density = [](double, double) -> double {
      throw InvalidArgument("Maxwell-Boltzmann density undefined for kT = 0");
    };
  }
  return out;
}

double mb_kramers_residual(const PhysicalParams& params, const PotentialSpec& pot,
                           std::span<const double> xs, std::span<const double> ps) {
  if (params.kT() <= 0.0) throw InvalidArgument("Maxwell-Boltzmann density undefined for kT = 0");
  const double m = params.mass(), kT = params.kT(), b = params.friction();
  double worst = 0.0;
  for (double x : xs) {
    const double du = pot.derivative(1, x);
    for (double p : ps) {
      const double w = std::exp(-(p * p / (2.0 * m) + pot.value(x)) / kT);
      const double dw_dx = -du / kT * w;
      const double dw_dp = -p / (m * kT) * w;
      const double d2w_dp2 = (p * p / (m * m * kT * kT) - 1.0 / (m * kT)) * w;
      const double liouville = -(p / m) * dw_dx + du * dw_dp;
      const double collision = b * (w / m + (p / m) * dw_dp + kT * d2w_dp2);
      worst = std::max(worst, std::abs(liouville + collision));
    }
  }
  return worst;
}

ReferenceCurve gaussian_variance_curve(const PhysicalParams& params, const PotentialSpec& pot,
                                       double sigma2_0) {
  if (!(sigma2_0 > 0.0)) throw InvalidArgument("initial variance must be > 0");
  if (params.friction() <= 0.0) throw InvalidArgument("strong-friction curve requires b > 0");
  const double w = omega_of(pot, params);
  const double m = params.mass(), b = params.friction(), hbar = params.hbar(), kT = params.kT();
  auto eval = [=](double t) {
    auto rhs = [=](const std::array<double, 1>& s, std::array<double, 1>& ds, double) {
      ds[0] = -2.0 * m * w * w * s[0] / b + hbar * hbar / (2.0 * m * b * s[0]) + 2.0 * kT / b;
    };
    return integrate_to(rhs, std::array<double, 1>{sigma2_0}, t)[0];
  };
  return {"gaussian_variance", eval,
          "second moment of the thermo-quantum diffusion equation under a Gaussian ansatz, "
          "integrated with dopri5 at tolerance 1e-13"};
}

ReferenceCurve damped_oscillator_mean(const PhysicalParams& params, double omega0, double x0,
                                      double v0) {
  const double gamma = params.friction() / params.mass();
  auto eval = [=](double t) {
    auto rhs = [=](const std::array<double, 2>& s, std::array<double, 2>& ds, double) {
      ds[0] = s[1];
      ds[1] = -gamma * s[1] - omega0 * omega0 * s[0];
    };
    return integrate_to(rhs, std::array<double, 2>{x0, v0}, t)[0];
  };
  return {"damped_oscillator_mean", eval,
          "Ehrenfest mean of a damped harmonic oscillator, integrated with dopri5"};
}

}  // namespace dqm::oracle
