#include "dqm/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dqm/error.hpp"

namespace dqm {
namespace {

constexpr double kMaxClipMass = 1e-10;
constexpr double kEdgeTolerance = 1e-12;
// Ghost-padded work arrays: padded index k holds node k - kPad.
constexpr std::size_t kPad = 4;

void require_friction(const PhysicalParams& params) {
  if (!(params.friction() > 0.0)) {
    throw InvalidArgument("overdamped dynamics needs a positive friction coefficient");
  }
}

// Quadrature weight of the actual density's quantum potential, and the
// surrogate (weight, variance) pairs of the remaining inverse-temperature nodes.
struct BetaQuadrature {
  double pressure_weight = 1.0;
  std::vector<double> weights;
  std::vector<double> variances;
};

BetaQuadrature beta_quadrature(const PhysicalParams& params, const PotentialSpec& pot,
                               int nodes) {
  BetaQuadrature q;
  if (nodes <= 1) return q;
  if (!(params.kT() > 0.0)) {
    throw InvalidArgument("inverse-temperature quadrature needs kT > 0");
  }
  double omega = pot.is_quadratic_or_less() ? pot.harmonic_frequency(params.mass()) : 0.0;
  if (!(omega > 0.0)) {
    throw InvalidArgument("inverse-temperature quadrature needs a confining harmonic potential");
  }
  double beta = 1.0 / params.kT();
  double h = beta / (nodes - 1);
  q.pressure_weight = params.kT() * h / 2.0;
  // Node 0 sits at infinite temperature where the surrogate is flat.
  for (int j = 1; j < nodes - 1; ++j) {
    q.weights.push_back(params.kT() * h);
    q.variances.push_back(surrogate_variance(1.0 / (j * h), params, omega));
  }
  return q;
}

}  // namespace

double surrogate_variance(double kT_prime, const PhysicalParams& params, double omega0) {
  if (!(omega0 > 0.0) || kT_prime < 0.0) {
    throw InvalidArgument("surrogate variance needs omega0 > 0 and kT' >= 0");
  }
  double h = params.hbar();
  return (kT_prime + std::sqrt(kT_prime * kT_prime + h * h * omega0 * omega0)) /
         (2.0 * params.mass() * omega0 * omega0);
}

double smoluchowski_max_dt(const Grid1D& grid, const PhysicalParams& params,
                           const PotentialSpec& pot, const SmoluchowskiOptions& options) {
  require_friction(params);
  if (!(options.stability_c > 0.0)) throw InvalidArgument("stability factor must be positive");
  BetaQuadrature q = beta_quadrature(params, pot, options.beta_nodes);
  double m = params.mass(), b = params.friction(), h = params.hbar(), dx = grid.dx();
  double lam_q = q.pressure_weight * h * h / (2.0 * m * b * std::pow(dx, 4));
  double lam_d = 0.4 * params.kT() / (b * dx * dx);
  double drift = 0.0;
  double span = grid.length();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double f = std::abs(pot.derivative(1, grid.x(i)));
    for (std::size_t j = 0; j < q.weights.size(); ++j) {
      double s2 = q.variances[j];
      f += q.weights[j] * h * h * span / (4.0 * m * s2 * s2);
    }
    drift = std::max(drift, f);
  }
  double lam_u = 0.4 * drift / (b * dx);
  double lam = lam_q + lam_d + lam_u;
  if (lam == 0.0) return std::numeric_limits<double>::infinity();
  return options.stability_c / lam;
}

SmoluchowskiSolver::SmoluchowskiSolver(const DensityField& rho0, const PhysicalParams& params,
                                       PotentialSpec pot, SmoluchowskiOptions options)
    : grid_(rho0.grid()),
      params_(params),
      pot_(std::move(pot)),
      options_(options),
      rho_(rho0.values().begin(), rho0.values().end()) {
  max_dt_ = smoluchowski_max_dt(grid_, params_, pot_, options_);
  std::size_t n = grid_.size();
  padded_rho_.resize(n + 2 * kPad);
  root_.resize(n + 2 * kPad);
  pressure_.resize(n + 2 * kPad);
  flux_.resize(n);
  face_drift_.resize(n);
  shifted_drift_.resize(n);
  BetaQuadrature q = beta_quadrature(params_, pot_, options_.beta_nodes);
  pressure_coefficient_ = q.pressure_weight * params_.hbar() * params_.hbar() / (2.0 * params_.mass());
  surrogate_weights_ = q.weights;
  surrogate_variances_ = q.variances;
  for (std::size_t i = 0; i < n; ++i) face_drift_[i] = pot_.derivative(1, grid_.x(i) + 0.5 * grid_.dx());
  check_edges();
}

void SmoluchowskiSolver::check_edges() const {
  if (edge_ratio(rho_) > kEdgeTolerance) {
    throw NumericalError("density is no longer negligible at the grid edges at t = " +
                         std::to_string(time_));
  }
}

DensityField SmoluchowskiSolver::density() const {
  return normalize(grid_, rho_).field;
}

double SmoluchowskiSolver::variance() const { return moments(rho_, grid_).variance; }

void SmoluchowskiSolver::compute_fluxes() {
  const std::size_t n = grid_.size();
  const double dx = grid_.dx();
  double* r = padded_rho_.data();
  for (std::size_t i = 0; i < n; ++i) r[i + kPad] = rho_[i];
  for (std::size_t g = 0; g < kPad; ++g) {
    if (grid_.periodic()) {
      r[g] = rho_[n - kPad + g];
      r[n + kPad + g] = rho_[g];
    } else {
      r[g] = rho_[0];
      r[n + kPad + g] = rho_[n - 1];
    }
  }
  double* a = root_.data();
  for (std::size_t k = 0; k < n + 2 * kPad; ++k) a[k] = std::sqrt(r[k] > 0.0 ? r[k] : 0.0);

  const double kT = params_.kT();
  const double cq = pressure_coefficient_;
  const double c1 = 1.0 / (12.0 * dx), c2 = 1.0 / (12.0 * dx * dx);
  double* pr = pressure_.data();
  for (std::size_t k = 2; k < n + 2 * kPad - 2; ++k) {
    double d1 = (a[k - 2] - 8.0 * a[k - 1] + 8.0 * a[k + 1] - a[k + 2]) * c1;
    double d2 = (-a[k - 2] + 16.0 * a[k - 1] - 30.0 * a[k] + 16.0 * a[k + 1] - a[k + 2]) * c2;
    pr[k] = kT * r[k] - cq * (a[k] * d2 - d1 * d1);
  }

  const double* drift = face_drift_.data();
  if (!surrogate_weights_.empty()) {
    double mean = moments(rho_, grid_).mean;
    double slope = 0.0;
    for (std::size_t j = 0; j < surrogate_weights_.size(); ++j) {
      double s2 = surrogate_variances_[j];
      slope += surrogate_weights_[j] * params_.hbar() * params_.hbar() /
               (4.0 * params_.mass() * s2 * s2);
    }
    for (std::size_t i = 0; i < n; ++i) {
      shifted_drift_[i] = face_drift_[i] - slope * (grid_.x(i) + 0.5 * dx - mean);
    }
    drift = shifted_drift_.data();
  }

  const double inv_b = 1.0 / params_.friction();
  const double f1 = 1.0 / 16.0, f2 = 1.0 / (24.0 * dx);
  double* fl = flux_.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = i + kPad;
    double rho_face = (-r[k - 1] + 9.0 * r[k] + 9.0 * r[k + 1] - r[k + 2]) * f1;
    double dp_face = (pr[k - 1] - 27.0 * pr[k] + 27.0 * pr[k + 1] - pr[k + 2]) * f2;
    fl[i] = (rho_face * drift[i] + dp_face) * inv_b;
  }
  if (!grid_.periodic()) fl[n - 1] = 0.0;
}

StepDiagnostics SmoluchowskiSolver::step(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("time step must be positive");
  if (dt > max_dt_ * (1.0 + 1e-12)) {
    throw NumericalError("time step " + std::to_string(dt) + " exceeds the stability bound " +
                         std::to_string(max_dt_));
  }
  compute_fluxes();
  const std::size_t n = grid_.size();
  const double ratio = dt / grid_.dx();
  const double* fl = flux_.data();
  double before = 0.0, after = 0.0, clipped = 0.0;
  double left = grid_.periodic() ? fl[n - 1] : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    before += rho_[i];
    double v = rho_[i] + ratio * (fl[i] - left);
    left = fl[i];
    after += v;
    if (v < 0.0) {
      clipped -= v;
      v = 0.0;
    }
    rho_[i] = v;
  }
  StepDiagnostics d;
  d.mass_drift = std::abs(after - before) * grid_.dx();
  d.clip_mass = clipped * grid_.dx();
  if (!std::isfinite(after)) throw NumericalError("density became non-finite");
  if (d.clip_mass > kMaxClipMass) {
    throw NumericalError("negative density clipping removed " + std::to_string(d.clip_mass) +
                         " of mass in one step");
  }
  if (clipped > 0.0) {
    double scale = before / (after + clipped);
    for (double& v : rho_) v *= scale;
  }
  worst_.mass_drift = std::max(worst_.mass_drift, d.mass_drift);
  worst_.clip_mass = std::max(worst_.clip_mass, d.clip_mass);
  time_ += dt;
  return d;
}

void SmoluchowskiSolver::advance_to(double t_target, double dt_max) {
  double remaining = t_target - time_;
  if (remaining <= 0.0) return;
  double dt_cap = std::min(dt_max, max_dt_);
  auto steps = static_cast<long>(std::ceil(remaining / dt_cap * (1.0 - 1e-12)));
  steps = std::max(steps, 1L);
  double dt = remaining / static_cast<double>(steps);
  for (long k = 0; k < steps; ++k) step(dt);
  time_ = t_target;
}

DensityField step_smoluchowski(const DensityField& rho, const PhysicalParams& params,
                               const PotentialSpec& pot, double dt,
                               const SmoluchowskiOptions& options) {
  SmoluchowskiSolver solver(rho, params, pot, options);
  solver.step(dt);
  return solver.density();
}

DensityField step_nonlinear_smoluchowski(const DensityField& rho, const PhysicalParams& params,
                                         const PotentialSpec& pot, double dt, int beta_nodes,
                                         double stability_c) {
  if (beta_nodes < 1) throw InvalidArgument("beta_nodes must be at least 1");
  return step_smoluchowski(rho, params, pot, dt, {stability_c, beta_nodes});
}

double gaussian_sigma_ode_rhs(double sigma2, const PhysicalParams& params,
                              const PotentialSpec& pot) {
  require_friction(params);
  if (!(sigma2 > 0.0)) throw InvalidArgument("variance must be positive");
  if (!pot.is_quadratic_or_less()) {
    throw InvalidArgument("Gaussian variance law holds only for quadratic potentials");
  }
  double m = params.mass(), b = params.friction(), h = params.hbar();
  double k = pot.derivative(2, 0.0);
  return -2.0 * k * sigma2 / b + h * h / (2.0 * m * b * sigma2) + 2.0 * params.kT() / b;
}

double dispersion_harmonic(double t, const PhysicalParams& params, double omega0) {
  require_friction(params);
  if (!(omega0 > 0.0)) throw InvalidArgument("omega0 must be positive");
  if (t < 0.0) throw InvalidArgument("time must be non-negative");
  double m = params.mass();
  return params.hbar() / (2.0 * m * omega0) *
         std::sqrt(-std::expm1(-4.0 * m * omega0 * omega0 * t / params.friction()));
}

double dispersion_free_implicit(double t, const PhysicalParams& params) {
  require_friction(params);
  if (t < 0.0) throw InvalidArgument("time must be non-negative");
  if (t == 0.0) return 0.0;
  double lam2 = std::pow(params.lambda_thermal(), 2);
  double target = 2.0 * params.diffusion() * t;
  double tol = 1e-12 * std::max(1.0, target);
  double s = target + params.hbar() * std::sqrt(t / (params.mass() * params.friction()));
  for (int it = 0; it < 100; ++it) {
    double f = s - lam2 * std::log1p(s / lam2) - target;
    if (std::abs(f) < tol) return s;
    double next = s - f * (lam2 + s) / s;
    s = next > 0.0 ? next : 0.5 * s;
  }
  throw NumericalError("implicit dispersion law did not converge");
}

}  // namespace dqm
