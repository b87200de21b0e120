#include "dqm/qpotential.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dqm/error.hpp"

namespace dqm {

namespace {

struct RootDerivatives {
  std::vector<double> a, a1, a2, a3;  // sqrt(rho) and its first three derivatives
};

RootDerivatives root_derivatives(std::span<const double> rho, const Grid1D& grid, bool third) {
  RootDerivatives r;
  r.a.resize(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) r.a[i] = std::sqrt(std::max(rho[i], 0.0));
  r.a1 = derivative(r.a, 1, grid);
  r.a2 = derivative(r.a, 2, grid);
  if (third) r.a3 = derivative(r.a, 3, grid);
  return r;
}

std::vector<std::uint8_t> checked_mask(std::span<const double> rho, const Grid1D& grid) {
  if (rho.size() != grid.size()) throw InvalidArgument("density size does not match grid");
  auto mask = evaluation_mask(rho);
  if (std::none_of(mask.begin(), mask.end(), [](auto m) { return m != 0; }))
    throw NumericalError("density is identically below the evaluation floor");
  return mask;
}

double hbar2_over_2m(const PhysicalParams& p) { return p.hbar() * p.hbar() / (2.0 * p.mass()); }

}  // namespace

std::vector<std::uint8_t> evaluation_mask(std::span<const double> rho, double floor) {
  double peak = 0.0;
  for (double v : rho) peak = std::max(peak, v);
  std::vector<std::uint8_t> mask(rho.size(), 0);
  if (peak <= 0.0) return mask;
  const double cut = floor * peak;
  for (std::size_t i = 0; i < rho.size(); ++i) mask[i] = rho[i] > cut ? 1 : 0;
  return mask;
}

void flat_extrapolate(std::span<double> values, std::span<const std::uint8_t> mask,
                      bool periodic) {
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  // Nearest in-mask index scanning left and right; a periodic ring is scanned twice.
  std::vector<std::ptrdiff_t> left(n, -1), right(n, -1);
  const std::ptrdiff_t passes = periodic ? 2 : 1;
  std::ptrdiff_t last = -1;
  for (std::ptrdiff_t k = 0; k < passes * n; ++k) {
    const auto i = k % n;
    if (mask[i]) last = k;
    if (k >= (passes - 1) * n) left[i] = last < 0 ? -1 : k - last;
  }
  last = -1;
  for (std::ptrdiff_t k = passes * n - 1; k >= 0; --k) {
    const auto i = k % n;
    if (mask[i]) last = k;
    if (k < n) right[i] = last < 0 ? -1 : last - k;
  }
  std::vector<double> src(values.begin(), values.end());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (mask[i]) continue;
    const bool use_left = right[i] < 0 || (left[i] >= 0 && left[i] <= right[i]);
    if (use_left && left[i] >= 0) values[i] = src[((i - left[i]) % n + n) % n];
    else if (right[i] >= 0) values[i] = src[(i + right[i]) % n];
  }
}

std::vector<double> quantum_potential(std::span<const double> rho, const Grid1D& grid,
                                      const PhysicalParams& params) {
  const auto mask = checked_mask(rho, grid);
  const auto r = root_derivatives(rho, grid, false);
  const double c = hbar2_over_2m(params);
  std::vector<double> q(rho.size(), 0.0);
  for (std::size_t i = 0; i < q.size(); ++i)
    if (mask[i]) q[i] = -c * r.a2[i] / r.a[i];
  flat_extrapolate(q, mask, grid.periodic());
  return q;
}

std::vector<double> quantum_potential(const DensityField& rho, const PhysicalParams& params) {
  return quantum_potential(rho.values(), rho.grid(), params);
}

std::vector<double> quantum_potential_log_form(const DensityField& rho,
                                               const PhysicalParams& params) {
  const auto& grid = rho.grid();
  const auto mask = checked_mask(rho.values(), grid);
  const auto d1 = derivative(rho.values(), 1, grid);
  const auto d2 = derivative(rho.values(), 2, grid);
  const double c = params.hbar() * params.hbar() / (8.0 * params.mass());
  std::vector<double> q(grid.size(), 0.0);
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!mask[i]) continue;
    const double l1 = d1[i] / rho[i];
    const double l2 = d2[i] / rho[i] - l1 * l1;
    q[i] = -c * (2.0 * l2 + l1 * l1);
  }
  flat_extrapolate(q, mask, grid.periodic());
  return q;
}

std::vector<double> quantum_force(std::span<const double> rho, const Grid1D& grid,
                                  const PhysicalParams& params) {
  const auto mask = checked_mask(rho, grid);
  const auto r = root_derivatives(rho, grid, true);
  const double c = hbar2_over_2m(params);
  std::vector<double> f(rho.size(), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!mask[i]) continue;
    const double a = r.a[i];
    f[i] = c * (r.a3[i] / a - r.a2[i] * r.a1[i] / (a * a));
  }
  flat_extrapolate(f, mask, grid.periodic());
  return f;
}

std::vector<double> quantum_force(const DensityField& rho, const PhysicalParams& params) {
  return quantum_force(rho.values(), rho.grid(), params);
}

std::vector<double> PressureField::total() const {
  std::vector<double> p(thermal.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = thermal[i] + quantum[i];
  return p;
}

PressureField pressure_field(const DensityField& rho, const PhysicalParams& params) {
  const auto& grid = rho.grid();
  const auto mask = checked_mask(rho.values(), grid);
  const std::size_t n = grid.size();
  PressureField out{grid, std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) out.thermal[i] = params.kT() * rho[i];
  if (params.hbar() == 0.0) return out;

  // rho (ln rho)'' = rho'' - rho'^2 / rho on the mask; in the tail the same
  // quantity is evaluated as rho'' - 4 (sqrt rho)'^2, which needs no division.
  const auto d1 = derivative(rho.values(), 1, grid);
  const auto d2 = derivative(rho.values(), 2, grid);
  const auto r = root_derivatives(rho.values(), grid, false);
  const double c = params.hbar() * params.hbar() / (4.0 * params.mass());
  for (std::size_t i = 0; i < n; ++i) {
    const double curvature = mask[i] ? d2[i] - d1[i] * d1[i] / rho[i]
                                     : d2[i] - 4.0 * r.a1[i] * r.a1[i];
    out.quantum[i] = -c * curvature;
  }
  return out;
}

double pressure_identity_residual(const DensityField& rho, const PhysicalParams& params) {
  const auto& grid = rho.grid();
  const auto mask = checked_mask(rho.values(), grid);
  const auto pressure = pressure_field(rho, params);
  const auto dp = derivative(pressure.total(), 1, grid);

  // Right-hand side through the chemical potential: rho Q' from the sqrt-form
  // force, rho kT (ln rho)' from the density gradient.
  std::vector<double> force(grid.size(), 0.0);
  if (params.hbar() > 0.0) force = quantum_force(rho, params);
  const auto d1 = derivative(rho.values(), 1, grid);

  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!mask[i]) continue;
    const double rhs = -rho[i] * force[i] + rho[i] * params.kT() * (d1[i] / rho[i]);
    num = std::max(num, std::abs(dp[i] - rhs));
    den = std::max(den, std::abs(rhs));
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : INFINITY;
  return num / den;
}

FisherMeanQ fisher_mean_q(const DensityField& rho, const PhysicalParams& params) {
  const auto& grid = rho.grid();
  if (edge_ratio(rho.values()) > 1e-10) {
    std::ostringstream os;
    os << "density does not vanish at the boundary (edge ratio " << edge_ratio(rho.values())
       << ")";
    throw NumericalError(os.str());
  }
  const auto mask = checked_mask(rho.values(), grid);
  const auto q = quantum_potential(rho, params);
  const auto d1 = derivative(rho.values(), 1, grid);
  const auto r = root_derivatives(rho.values(), grid, false);
  std::vector<double> rq(grid.size()), fisher(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rq[i] = rho[i] * q[i];
    fisher[i] = mask[i] ? d1[i] * d1[i] / rho[i] : 4.0 * r.a1[i] * r.a1[i];
  }
  const double c = params.hbar() * params.hbar() / (8.0 * params.mass());
  return {integrate(rq, grid), c * integrate(fisher, grid)};
}

}  // namespace dqm
