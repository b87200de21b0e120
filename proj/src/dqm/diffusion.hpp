#pragma once

#include <string>
#include <vector>

#include "dqm/core.hpp"

namespace dqm {

/// sigma^2(t) samples with a label naming where they came from.
struct DispersionSeries {
  std::vector<double> t;
  std::vector<double> sigma2;
  std::string source;  // pde | ode | closed-form | implicit
};

struct SmoluchowskiOptions {
  /// Safety factor C in dt <= C * 2 m b dx^4 / hbar^2.
  double stability_c = 0.1;
  /// 0 selects the thermo-quantum equation; >= 1 selects the nonlinear
  /// (inverse-temperature integrated) equation with that many quadrature nodes.
  int beta_nodes = 0;
};

struct StepDiagnostics {
  double mass_drift = 0.0;  // |mass after - mass before| of the flux update
  double clip_mass = 0.0;   // negative mass removed by clipping
};

/// Largest explicit step allowed for the grid, parameters and potential.
/// The quantum pressure term gives the dx^4 bound; diffusion and drift add
/// their dx^2 and dx rates.
double smoluchowski_max_dt(const Grid1D& grid, const PhysicalParams& params,
                           const PotentialSpec& pot, const SmoluchowskiOptions& options = {});

/// Explicit conservative solver for
///   d rho/dt = d/dx [ rho (U + Q)'/b + D rho' ]
/// and its inverse-temperature integrated variant.
class SmoluchowskiSolver {
 public:
  SmoluchowskiSolver(const DensityField& rho0, const PhysicalParams& params, PotentialSpec pot,
                     SmoluchowskiOptions options = {});

  /// One explicit step. Throws NumericalError when dt exceeds the stability
  /// bound or clipping removes more than 1e-10 of mass.
  StepDiagnostics step(double dt);
  /// Steps of size <= dt_max until `t_target`, the last one shortened to land on it.
  void advance_to(double t_target, double dt_max);

  double time() const { return time_; }
  DensityField density() const;
  std::span<const double> values() const { return rho_; }
  double variance() const;
  double max_dt() const { return max_dt_; }
  const StepDiagnostics& worst() const { return worst_; }
  /// Throws NumericalError when the density is no longer negligible at the edges.
  void check_edges() const;

 private:
  void compute_fluxes();

  Grid1D grid_;
  PhysicalParams params_;
  PotentialSpec pot_;
  SmoluchowskiOptions options_;
  std::vector<double> rho_, padded_rho_, root_, pressure_, flux_, face_drift_, shifted_drift_;
  std::vector<double> surrogate_weights_, surrogate_variances_;
  double pressure_coefficient_ = 0.0;
  double time_ = 0.0;
  double max_dt_ = 0.0;
  StepDiagnostics worst_;
};

DensityField step_smoluchowski(const DensityField& rho, const PhysicalParams& params,
                               const PotentialSpec& pot, double dt,
                               const SmoluchowskiOptions& options = {});

DensityField step_nonlinear_smoluchowski(const DensityField& rho, const PhysicalParams& params,
                                         const PotentialSpec& pot, double dt, int beta_nodes,
                                         double stability_c = 0.1);

/// d sigma^2/dt of a Gaussian: -2 m w^2 s/b + hbar^2/(2 m b s) + 2 D.
double gaussian_sigma_ode_rhs(double sigma2, const PhysicalParams& params,
                              const PotentialSpec& pot);

/// (hbar / 2 m w) sqrt(1 - exp(-4 m w^2 t / b)).
double dispersion_harmonic(double t, const PhysicalParams& params, double omega0);

/// Root of s - lambdaT^2 ln(1 + s / lambdaT^2) = 2 D t by Newton iteration.
double dispersion_free_implicit(double t, const PhysicalParams& params);

/// Variance of the Gaussian equilibrium surrogate at temperature kT_prime in a
/// harmonic potential: positive root of m w^2 s^2 - kT' s - hbar^2 / 4m = 0.
double surrogate_variance(double kT_prime, const PhysicalParams& params, double omega0);

}  // namespace dqm
