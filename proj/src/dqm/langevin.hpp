#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "dqm/core.hpp"
#include "dqm/phasespace.hpp"

namespace dqm {

/// Philox4x32-10 counter-based generator (Salmon et al. 2011 constants).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Two standard normals from one Philox block (Box-Muller on 53-bit uniforms).
std::array<double, 2> philox_normals(std::uint64_t seed, std::uint64_t stream,
                                     std::uint64_t draw);

/// Bivariate Gaussian in (x, v).
struct GaussianPhaseSpec {
  double mean_x = 0.0;
  double var_x = 0.0;
  double mean_v = 0.0;
  double var_v = 0.0;
  double cov_xv = 0.0;

  /// sigma_x (m sigma_v) = hbar/2 with zero correlation.
  static GaussianPhaseSpec minimal_uncertainty(const PhysicalParams& params, double mean_x,
                                               double var_x, double mean_v = 0.0);
  /// Harmonic ground state: var_x = hbar/(2 m w0), var_v = hbar w0/(2 m).
  static GaussianPhaseSpec ground_state(const PhysicalParams& params, double omega0,
                                        double mean_x = 0.0, double mean_v = 0.0);
};

struct EnsembleDiagnostics {
  double quantum_force_mean = 0.0;    // last step, ensemble average of F_Q
  double quantum_force_stderr = 0.0;  // last step, sample std / sqrt(N)
  std::size_t kde_extrapolated = 0;   // cumulative count of flat-extrapolated forces
};

/// Particles with per-particle counter-based noise streams.
struct TrajectoryEnsemble {
  std::vector<double> x;
  std::vector<double> v;
  std::vector<std::uint64_t> stream;
  std::uint64_t seed = 0;
  std::uint64_t steps = 0;
  double time = 0.0;
  EnsembleDiagnostics diagnostics;

  std::size_t size() const { return x.size(); }
};

/// Draws N particles; particle i uses stream i and draw 0.
TrajectoryEnsemble sample_wigner_initial(const GaussianPhaseSpec& spec, std::size_t n,
                                         std::uint64_t seed);

struct Bandwidth {
  enum class Rule { silverman, fixed };
  Rule rule = Rule::silverman;
  double value = 0.0;  // used by Rule::fixed

  static Bandwidth silverman() { return {}; }
  static Bandwidth fixed(double h) { return {Rule::fixed, h}; }
};

enum class QuantumForceMode { none, meanfield };

struct ForceModel {
  bool thermal = false;
  QuantumForceMode quantum = QuantumForceMode::none;
  Bandwidth bandwidth;
  PotentialSpec potential;
};

struct MeanFieldForce {
  std::vector<double> force;
  double bandwidth = 0.0;
  std::size_t extrapolated = 0;  // particles outside the KDE support
};

/// Relative KDE floor defining the support of the mean-field force.
inline constexpr double kKdeFloor = 1e-10;

/// -dQ[rho_hat]/dx at every particle, rho_hat the Gaussian-kernel density
/// estimate of the positions, evaluated on a binned scratch grid and
/// interpolated linearly. Requires N >= 1000.
MeanFieldForce meanfield_quantum_force(const TrajectoryEnsemble& ens,
                                       const PhysicalParams& params, Bandwidth bandwidth);

/// Same estimator evaluated by direct kernel sums at one point (reference).
double meanfield_quantum_force_at(const TrajectoryEnsemble& ens, const PhysicalParams& params,
                                  double h, double x);

/// One symplectic Euler-Maruyama step in place:
/// v += dt (F - b v)/m + xi, x += dt v, var xi = 2 b kT dt / m^2.
void advance_ensemble(TrajectoryEnsemble& ens, const PhysicalParams& params,
                      const ForceModel& model, double dt);
TrajectoryEnsemble step_ensemble(const TrajectoryEnsemble& ens, const PhysicalParams& params,
                                 const ForceModel& model, double dt);

struct VelocityBin {
  double x;        // bin center
  double mean_v;   // V(x); NaN when empty
  std::size_t count;
  bool undersampled;  // count < 10
};

struct EnsembleStatistics {
  std::size_t n;
  double mean_x;
  double var_x;
  double mean_v;
  double var_v;
  std::vector<VelocityBin> velocity_field;
  std::optional<WignerField> histogram;  // (x, p = m v) density on the grid
  std::size_t outside = 0;               // particles beyond the histogram momentum range
};

/// Moments, binned V(x) on `velocity_bins` equal bins over [min x, max x], and
/// the optional phase-space histogram (x wrapped onto the periodic grid).
/// Requires N >= 100.
EnsembleStatistics ensemble_statistics(const TrajectoryEnsemble& ens, const PhysicalParams& params,
                                       const std::optional<PhaseSpaceGrid>& grid = std::nullopt,
                                       std::size_t velocity_bins = 32);

/// Standard error of the sample variance of x (fourth-moment estimate).
double variance_standard_error(const std::vector<double>& values);

/// CSV with header id,x,v.
void write_ensemble_csv(std::ostream& out, const TrajectoryEnsemble& ens);

}  // namespace dqm
