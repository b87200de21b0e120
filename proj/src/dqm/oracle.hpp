#pragma once

#include <functional>
#include <string>

#include "dqm/core.hpp"

// Analytic references and independent high-order integrators. Nothing here
// shares discretization code with the solvers it is used to validate.
namespace dqm::oracle {

struct ReferenceCurve {
  std::string label;
  std::function<double(double)> eval;
  std::string provenance;

  double operator()(double t) const { return eval(t); }
};

/// det of the transition matrix of x' = v, v' = -(b/m) v - omega0^2 x,
/// integrated numerically (dopri5, tolerance 1e-13). Equals the commutator
/// factor [r(t), p(t)] / (i hbar) for linear dynamics. Throws InvalidArgument
/// for potentials beyond quadratic order.
double commutator_factor(const PhysicalParams& params, const PotentialSpec& pot, double t);

/// exp(-b t / m).
double commutator_factor_closed_form(const PhysicalParams& params, double t);

/// hbar sqrt(t / (m b)).
double free_quantum_dispersion(double t, const PhysicalParams& params);

/// 2 D t.
double einstein_dispersion(double t, const PhysicalParams& params);

struct EquilibriumReferences {
  /// Normalized Maxwell-Boltzmann density exp(-(p^2/2m + U)/kT) / Z.
  /// Normalization is analytic for quadratic potentials.
  std::function<double(double x, double p)> mb_phase_density;
  double ground_sigma2;     // hbar / (2 m omega0)
  double classical_sigma2;  // kT / (m omega0^2)
};

/// Throws when the potential is not harmonic or kT = 0 (MB entries).
EquilibriumReferences equilibrium_references(const PhysicalParams& params,
                                             const PotentialSpec& pot);

/// Residual of the Klein-Kramers right-hand side on the MB density, evaluated
/// with symbolic p- and x-derivatives at the given points; max |.|.
double mb_kramers_residual(const PhysicalParams& params, const PotentialSpec& pot,
                           std::span<const double> xs, std::span<const double> ps);

/// Variance of a Gaussian under strong-friction diffusion in a free or
/// harmonic potential, from sigma2(0) = sigma2_0, by integrating the moment
/// equation d sigma2/dt = -2 m w^2 s/b + hbar^2/(2 m b s) + 2 kT/b.
ReferenceCurve gaussian_variance_curve(const PhysicalParams& params, const PotentialSpec& pot,
                                       double sigma2_0);

/// Mean position of the damped oscillator m x'' + b x' + m w^2 x = 0.
ReferenceCurve damped_oscillator_mean(const PhysicalParams& params, double omega0, double x0,
                                      double v0);

}  // namespace dqm::oracle
