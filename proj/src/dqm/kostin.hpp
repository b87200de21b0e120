#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "dqm/core.hpp"

namespace dqm {

/// Hydrodynamic form of a nodeless wave function.
struct MadelungFields {
  DensityField rho;
  std::vector<double> S;             // unwrapped action, zero at the density maximum
  std::vector<double> V;             // velocity S'/m
  std::vector<std::uint8_t> mask;    // nodes above the density floor
};

/// rho = |psi|^2, S = hbar * unwrapped phase, V = (hbar/m) Im(psi'/psi).
/// The phase is unwrapped outward from argmax rho through the contiguous
/// in-mask region; S and V are held flat outside it. Throws NumericalError
/// when adjacent in-mask phases differ by more than pi/2 (unresolved winding).
MadelungFields madelung_decompose(const WaveFunction& psi, const PhysicalParams& params);

struct Observables {
  double norm;
  double mean;
  double variance;
  double momentum;  // m * integral rho V = hbar * integral Im(psi* psi')
  double energy;    // integral hbar^2 |psi'|^2 / 2m + U |psi|^2
};

Observables observe(const WaveFunction& psi, const PhysicalParams& params,
                    const PotentialSpec& pot);

/// Strang split step of
///   i hbar psi_t = [-hbar^2/2m d2/dx2 + U + (b/m) S + kT ln rho] psi
/// on a periodic grid. The potential half steps integrate the phase equation
/// dS/dt = -(U + kT ln rho) - (b/m) S exactly (rho is constant there), so the
/// friction term keeps second-order accuracy. Throws NumericalError when the
/// norm drifts by more than 1e-8.
WaveFunction step_kostin(const WaveFunction& psi, const PhysicalParams& params,
                         const PotentialSpec& pot, double dt);

/// Stateful form of step_kostin that reuses its work arrays.
class KostinSolver {
 public:
  KostinSolver(const WaveFunction& psi0, const PhysicalParams& params, PotentialSpec pot);

  void step(double dt);
  double time() const { return time_; }
  WaveFunction wave_function() const { return {grid_, psi_}; }
  std::span<const cplx> values() const { return psi_; }
  const Grid1D& grid() const { return grid_; }

 private:
  void potential_flow(double tau);

  Grid1D grid_;
  PhysicalParams params_;
  PotentialSpec pot_;
  std::vector<cplx> psi_;
  std::vector<double> potential_, kinetic_k2_;
  double time_ = 0.0;
};

/// Largest step of the split-step accuracy heuristic, dx^2 m / (pi hbar).
double kostin_max_dt(const Grid1D& grid, const PhysicalParams& params);

struct EvolutionRecord {
  std::vector<double> t;
  std::vector<Observables> observables;
  std::vector<WaveFunction> snapshots;  // filled when requested
};

/// Runs `steps_total = round(t_max / dt)` steps, recording every `cadence` steps
/// (and at t = 0). Throws InvalidArgument when dt exceeds kostin_max_dt.
EvolutionRecord evolve_kostin(const WaveFunction& psi0, const PhysicalParams& params,
                              const PotentialSpec& pot, double t_max, double dt, int cadence,
                              bool keep_snapshots = false);

struct MadelungResiduals {
  double momentum;    // m V_t + m V V' + b V + (U + Q)' + kT (ln rho)'
  double continuity;  // rho_t + (rho V)'
};

/// Residuals of the hydrodynamic equations at the middle of three snapshots
/// spaced dt apart. Time derivatives are centered; space derivatives are taken
/// from psi directly. The momentum residual is weighted by rho and normalized
/// by the largest rho-weighted term magnitude; the continuity residual is
/// normalized by the largest term magnitude plus rho_max * hbar / (m sigma^2).
MadelungResiduals madelung_residuals(std::span<const WaveFunction> snapshots, double dt,
                                     const PhysicalParams& params, const PotentialSpec& pot);

/// x, Re psi, Im psi, rho, S, V.
void write_snapshot_csv(std::ostream& out, const WaveFunction& psi, const PhysicalParams& params);

}  // namespace dqm
