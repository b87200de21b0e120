#include "dqm/kostin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dqm/csv.hpp"
#include "dqm/error.hpp"
#include "dqm/fft.hpp"
#include "dqm/qpotential.hpp"

namespace dqm {
namespace {

constexpr double kMaxPhaseJump = std::numbers::pi / 2.0;
constexpr double kMaxNormDrift = 1e-8;

void require_periodic(const Grid1D& grid) {
  if (!grid.periodic()) throw InvalidArgument("split-step evolution needs a periodic grid");
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct UnwrappedPhase {
  std::vector<double> phase;
  std::vector<std::uint8_t> region;  // contiguous in-mask nodes reached from argmax
};

// Cumulative unwrap outward from the density maximum, gauged to zero there.
UnwrappedPhase unwrap_phase(std::span<const cplx> psi, std::span<const double> rho,
                            std::span<const std::uint8_t> mask, bool periodic) {
  const std::size_t n = psi.size();
  UnwrappedPhase u{std::vector<double>(n, 0.0), std::vector<std::uint8_t>(n, 0)};
  const std::size_t start = argmax(rho);
  u.region[start] = 1;
  auto advance = [&](std::size_t from, std::size_t to) {
    double d = std::arg(psi[to] * std::conj(psi[from]));
    if (std::abs(d) > kMaxPhaseJump) {
      throw NumericalError("phase jumps by " + std::to_string(d) + " rad between nodes " +
                           std::to_string(from) + " and " + std::to_string(to) +
                           "; refine the grid");
    }
    u.phase[to] = u.phase[from] + d;
    u.region[to] = 1;
  };
  // Right, then left; on a ring each walk stops when it meets visited nodes.
  for (int dir : {+1, -1}) {
    std::size_t i = start;
    for (std::size_t k = 1; k < n; ++k) {
      std::size_t j;
      if (periodic) {
        j = dir > 0 ? (i + 1) % n : (i + n - 1) % n;
      } else {
        if ((dir > 0 && i + 1 >= n) || (dir < 0 && i == 0)) break;
        j = dir > 0 ? i + 1 : i - 1;
      }
      if (!mask[j] || u.region[j]) break;
      advance(i, j);
      i = j;
    }
  }
  flat_extrapolate(u.phase, u.region, periodic);
  return u;
}

std::vector<double> density_of(std::span<const cplx> psi) {
  std::vector<double> rho(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) rho[i] = std::norm(psi[i]);
  return rho;
}

double l2_norm(std::span<const cplx> psi, const Grid1D& grid) {
  double s = 0.0;
  for (auto z : psi) s += std::norm(z);
  return s * grid.dx();
}

}  // namespace

MadelungFields madelung_decompose(const WaveFunction& psi, const PhysicalParams& params) {
  const Grid1D& grid = psi.grid();
  auto rho = psi.density();
  auto mask = evaluation_mask(rho);
  auto u = unwrap_phase(psi.values(), rho, mask, grid.periodic());
  std::vector<double> S(u.phase.size());
  for (std::size_t i = 0; i < S.size(); ++i) S[i] = params.hbar() * u.phase[i];

  auto d = derivative(psi.values(), 1, grid);
  std::vector<double> V(S.size(), 0.0);
  for (std::size_t i = 0; i < V.size(); ++i) {
    if (u.region[i]) V[i] = params.hbar() / params.mass() * std::imag(d[i] / psi[i]);
  }
  flat_extrapolate(V, u.region, grid.periodic());
  return {DensityField(grid, std::move(rho)), std::move(S), std::move(V), std::move(u.region)};
}

Observables observe(const WaveFunction& psi, const PhysicalParams& params,
                    const PotentialSpec& pot) {
  const Grid1D& grid = psi.grid();
  auto rho = psi.density();
  auto d = derivative(psi.values(), 1, grid);
  std::vector<double> current(rho.size()), energy(rho.size());
  const double h = params.hbar(), m = params.mass();
  for (std::size_t i = 0; i < rho.size(); ++i) {
    current[i] = h * std::imag(std::conj(psi[i]) * d[i]);
    energy[i] = h * h * std::norm(d[i]) / (2.0 * m) + pot.value(grid.x(i)) * rho[i];
  }
  Observables o;
  o.norm = integrate(rho, grid);
  auto mo = moments(rho, grid);
  o.mean = mo.mean;
  o.variance = mo.variance;
  o.momentum = integrate(current, grid);
  o.energy = integrate(energy, grid);
  return o;
}

KostinSolver::KostinSolver(const WaveFunction& psi0, const PhysicalParams& params,
                           PotentialSpec pot)
    : grid_(psi0.grid()),
      params_(params),
      pot_(std::move(pot)),
      psi_(psi0.values().begin(), psi0.values().end()) {
  require_periodic(grid_);
  if (!(params_.hbar() > 0.0)) throw InvalidArgument("wave-function evolution needs hbar > 0");
  const std::size_t n = grid_.size();
  potential_.resize(n);
  kinetic_k2_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    potential_[i] = pot_.value(grid_.x(i));
    double k = fft::wavenumber(i, n, grid_.length());
    kinetic_k2_[i] = k * k;
  }
}

void KostinSolver::potential_flow(double tau) {
  const std::size_t n = grid_.size();
  const double h = params_.hbar();
  const double gamma = params_.friction() / params_.mass();
  const double kT = params_.kT();
  if (gamma == 0.0 && kT == 0.0) {
    for (std::size_t i = 0; i < n; ++i) psi_[i] *= std::polar(1.0, -potential_[i] * tau / h);
    return;
  }
  auto rho = density_of(psi_);
  auto mask = evaluation_mask(rho);
  std::vector<double> drive(potential_);
  if (kT > 0.0) {
    std::vector<double> log_rho(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i]) log_rho[i] = std::log(rho[i]);
    }
    flat_extrapolate(log_rho, mask, true);
    for (std::size_t i = 0; i < n; ++i) drive[i] += kT * log_rho[i];
  }
  // dS/dt = -drive - gamma S with rho frozen:
  // S(tau) - S(0) = -(drive + gamma S(0)) (1 - exp(-gamma tau)) / gamma.
  const double g = gamma > 0.0 ? -std::expm1(-gamma * tau) / gamma : tau;
  std::vector<double> S(n, 0.0);
  if (gamma > 0.0) {
    auto u = unwrap_phase(psi_, rho, mask, true);
    for (std::size_t i = 0; i < n; ++i) S[i] = h * u.phase[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    double dS = -(drive[i] + gamma * S[i]) * g;
    psi_[i] *= std::polar(1.0, dS / h);
  }
}

void KostinSolver::step(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("time step must be positive");
  const double before = l2_norm(psi_, grid_);
  potential_flow(0.5 * dt);
  fft::forward(psi_);
  const double c = params_.hbar() * dt / (2.0 * params_.mass());
  for (std::size_t i = 0; i < psi_.size(); ++i) psi_[i] *= std::polar(1.0, -c * kinetic_k2_[i]);
  fft::backward(psi_);
  potential_flow(0.5 * dt);
  const double after = l2_norm(psi_, grid_);
  if (!(std::abs(after - before) <= kMaxNormDrift)) {
    throw NumericalError("norm drifted by " + std::to_string(after - before) + " in one step");
  }
  time_ += dt;
}

WaveFunction step_kostin(const WaveFunction& psi, const PhysicalParams& params,
                         const PotentialSpec& pot, double dt) {
  KostinSolver solver(psi, params, pot);
  solver.step(dt);
  return solver.wave_function();
}

double kostin_max_dt(const Grid1D& grid, const PhysicalParams& params) {
  return grid.dx() * grid.dx() * params.mass() / (std::numbers::pi * params.hbar());
}

EvolutionRecord evolve_kostin(const WaveFunction& psi0, const PhysicalParams& params,
                              const PotentialSpec& pot, double t_max, double dt, int cadence,
                              bool keep_snapshots) {
  if (!(t_max >= 0.0)) throw InvalidArgument("t_max must be non-negative");
  if (cadence < 1) throw InvalidArgument("record cadence must be at least one step");
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  if (dt > kostin_max_dt(psi0.grid(), params) * (1.0 + 1e-12)) {
    throw InvalidArgument("dt exceeds dx^2 m / (pi hbar) = " +
                          std::to_string(kostin_max_dt(psi0.grid(), params)));
  }
  KostinSolver solver(psi0, params, pot);
  EvolutionRecord rec;
  auto record = [&](double t) {
    auto psi = solver.wave_function();
    rec.t.push_back(t);
    rec.observables.push_back(observe(psi, params, pot));
    if (keep_snapshots) rec.snapshots.push_back(std::move(psi));
  };
  const long steps = std::lround(t_max / dt);
  record(0.0);
  for (long k = 1; k <= steps; ++k) {
    solver.step(dt);
    if (k % cadence == 0 || k == steps) record(static_cast<double>(k) * dt);
  }
  return rec;
}

MadelungResiduals madelung_residuals(std::span<const WaveFunction> snapshots, double dt,
                                     const PhysicalParams& params, const PotentialSpec& pot) {
  if (snapshots.size() < 3) throw InvalidArgument("residuals need three consecutive snapshots");
  if (!(dt > 0.0)) throw InvalidArgument("snapshot spacing must be positive");
  const Grid1D& grid = snapshots[0].grid();
  for (const auto& s : snapshots) {
    if (!(s.grid() == grid)) throw InvalidArgument("snapshots live on different grids");
  }
  const std::size_t n = grid.size();
  const double h = params.hbar(), m = params.mass(), b = params.friction(), kT = params.kT();

  auto velocity = [&](const WaveFunction& psi, std::span<const cplx> d, std::size_t i) {
    return h / m * std::imag(d[i] / psi[i]);
  };

  MadelungResiduals worst{0.0, 0.0};
  for (std::size_t j = 1; j + 1 < snapshots.size(); ++j) {
    const auto& prev = snapshots[j - 1];
    const auto& cur = snapshots[j];
    const auto& next = snapshots[j + 1];
    auto d1 = derivative(cur.values(), 1, grid);
    auto d2 = derivative(cur.values(), 2, grid);
    auto dp = derivative(prev.values(), 1, grid);
    auto dn = derivative(next.values(), 1, grid);
    auto rho = cur.density(), rho_p = prev.density(), rho_n = next.density();
    auto mask = evaluation_mask(rho), mask_p = evaluation_mask(rho_p),
         mask_n = evaluation_mask(rho_n);
    auto force_q = quantum_force(rho, grid, params);

    std::vector<double> current(n);
    for (std::size_t i = 0; i < n; ++i) current[i] = h / m * std::imag(std::conj(cur[i]) * d1[i]);
    auto dcurrent = derivative(current, 1, grid);

    double mom_res = 0.0, mom_scale = 0.0, con_res = 0.0, con_scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double rho_t = (rho_n[i] - rho_p[i]) / (2.0 * dt);
      con_res = std::max(con_res, std::abs(rho_t + dcurrent[i]));
      con_scale = std::max(con_scale, std::abs(rho_t) + std::abs(dcurrent[i]));
      if (!(mask[i] && mask_p[i] && mask_n[i])) continue;
      cplx l1 = d1[i] / cur[i];
      double v = h / m * std::imag(l1);
      double dv = h / m * std::imag(d2[i] / cur[i] - l1 * l1);
      double v_t = (velocity(next, dn, i) - velocity(prev, dp, i)) / (2.0 * dt);
      double terms[] = {m * v_t, m * v * dv, b * v, pot.derivative(1, grid.x(i)), -force_q[i],
                        kT * 2.0 * std::real(l1)};
      double sum = 0.0, mag = 0.0;
      for (double t : terms) {
        sum += t;
        mag += std::abs(t);
      }
      mom_res = std::max(mom_res, rho[i] * std::abs(sum));
      mom_scale = std::max(mom_scale, rho[i] * mag);
    }
    double rho_max = *std::max_element(rho.begin(), rho.end());
    double var = moments(rho, grid).variance;
    con_scale += rho_max * h / (m * var);
    worst.momentum = std::max(worst.momentum, mom_scale > 0.0 ? mom_res / mom_scale : 0.0);
    worst.continuity = std::max(worst.continuity, con_res / con_scale);
  }
  return worst;
}

void write_snapshot_csv(std::ostream& out, const WaveFunction& psi, const PhysicalParams& params) {
  auto f = madelung_decompose(psi, params);
  csv::header(out, {"x", "re_psi", "im_psi", "rho", "S", "V"});
  for (std::size_t i = 0; i < psi.grid().size(); ++i) {
    csv::row(out, {psi.grid().x(i), psi[i].real(), psi[i].imag(), f.rho[i], f.S[i], f.V[i]});
  }
}

}  // namespace dqm
