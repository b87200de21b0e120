#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dqm/core.hpp"

namespace dqm {

/// Relative density floor below which the quantum potential is not evaluated.
inline constexpr double kDensityFloor = 1e-12;

/// Nodes where rho > floor * max(rho).
std::vector<std::uint8_t> evaluation_mask(std::span<const double> rho,
                                          double floor = kDensityFloor);

/// Replaces masked-out entries by the value of the nearest in-mask node
/// (distance measured around the ring when `periodic`).
void flat_extrapolate(std::span<double> values, std::span<const std::uint8_t> mask,
                      bool periodic = false);

/// Q = -(hbar^2 / 2m) (sqrt rho)'' / sqrt rho on the mask, flat outside.
std::vector<double> quantum_potential(const DensityField& rho, const PhysicalParams& params);
std::vector<double> quantum_potential(std::span<const double> rho, const Grid1D& grid,
                                      const PhysicalParams& params);

/// Same quantity through the logarithmic form
/// Q = -(hbar^2 / 8m) [2 (ln rho)'' + ((ln rho)')^2]; used as a cross-check.
std::vector<double> quantum_potential_log_form(const DensityField& rho,
                                               const PhysicalParams& params);

/// -dQ/dx on the mask, flat outside. Evaluated from derivatives of sqrt(rho)
/// so no derivative of the extrapolated tail is ever taken.
std::vector<double> quantum_force(const DensityField& rho, const PhysicalParams& params);
std::vector<double> quantum_force(std::span<const double> rho, const Grid1D& grid,
                                  const PhysicalParams& params);

/// Pressure P = kT rho - (hbar^2 / 4m) rho (ln rho)'' split into its parts.
struct PressureField {
  Grid1D grid;
  std::vector<double> thermal;
  std::vector<double> quantum;

  std::vector<double> total() const;
};

PressureField pressure_field(const DensityField& rho, const PhysicalParams& params);

/// max |dP/dx - rho dmu/dx| / max |rho dmu/dx| over the mask, with
/// mu = kT ln rho + Q. For kT = 0 this is the pure quantum identity dP/dx = rho dQ/dx.
double pressure_identity_residual(const DensityField& rho, const PhysicalParams& params);

struct FisherMeanQ {
  double mean_q;       // integral of rho Q
  double fisher_form;  // (hbar^2 / 8m) integral of rho'^2 / rho
};

/// Mean quantum potential in both forms. Throws when the density does not
/// vanish at the grid ends (boundary terms of the integration by parts).
FisherMeanQ fisher_mean_q(const DensityField& rho, const PhysicalParams& params);

}  // namespace dqm
