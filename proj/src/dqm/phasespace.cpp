#include "dqm/phasespace.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "dqm/csv.hpp"
#include "dqm/error.hpp"
#include "dqm/fft.hpp"
#include "dqm/qpotential.hpp"

namespace dqm {
namespace {

constexpr double kEdgeTolerance = 1e-10;
constexpr double kMaxWeightDrift = 1e-10;
constexpr double kMarginalFloor = -1e-8;

double factorial(int k) {
  double f = 1.0;
  for (int j = 2; j <= k; ++j) f *= j;
  return f;
}

// (hbar/2i)^{2k} / (2k+1)! = (-hbar^2/4)^k / (2k+1)!
double moyal_coefficient(int k, double hbar) {
  return std::pow(-hbar * hbar / 4.0, k) / factorial(2 * k + 1);
}

int highest_moyal_order(const PotentialSpec& pot, bool quantum) {
  if (!quantum) return 0;
  return std::max(0, (pot.degree() - 1) / 2);
}

// Plans and buffers for spectral operations on a phase-space grid.
struct SpectralOps {
  explicit SpectralOps(const PhaseSpaceGrid& g)
      : grid(g),
        p_axis(g.np(), g.nx(), 1, g.np()),
        x_axis(g.nx(), g.np(), g.np(), 1),
        hat(g.nx() * p_axis.bins()),
        hat2(g.nx() * p_axis.bins()),
        xhat(g.np() * x_axis.bins()),
        kp(p_axis.bins()),
        kx(x_axis.bins()) {
    for (std::size_t q = 0; q < kp.size(); ++q)
      kp[q] = fft::wavenumber(q, g.np(), 2.0 * g.p_max());
    for (std::size_t q = 0; q < kx.size(); ++q)
      kx[q] = fft::wavenumber(q, g.nx(), g.x_grid().length());
  }

  std::size_t bins() const { return p_axis.bins(); }
  bool p_nyquist(std::size_t q) const { return 2 * q == grid.np(); }

  // out = IFFT_p[ mult(i, q) * FFT_p[w] ]
  template <typename Mult>
  void p_multiply(const double* w, double* out, Mult mult) {
    p_axis.forward(w, hat.data());
    const std::size_t nb = bins();
    for (std::size_t i = 0; i < grid.nx(); ++i)
      for (std::size_t q = 0; q < nb; ++q) hat[i * nb + q] *= mult(i, q);
    p_axis.backward(hat.data(), out);
  }

  void x_derivative(const double* w, double* out) {
    x_axis.forward(w, xhat.data());
    const std::size_t nb = x_axis.bins();
    for (std::size_t j = 0; j < grid.np(); ++j)
      for (std::size_t q = 0; q < nb; ++q) {
        bool nyquist = 2 * q == grid.nx();
        xhat[j * nb + q] *= nyquist ? cplx(0.0) : cplx(0.0, kx[q]);
      }
    x_axis.backward(xhat.data(), out);
  }

  const PhaseSpaceGrid& grid;
  fft::RealAxis p_axis, x_axis;
  std::vector<cplx> hat, hat2, xhat;
  std::vector<double> kp, kx;
};

std::vector<double> x_marginal_raw(std::span<const double> w, const PhaseSpaceGrid& g) {
  std::vector<double> rho(g.nx(), 0.0);
  for (std::size_t i = 0; i < g.nx(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < g.np(); ++j) s += w[g.index(i, j)];
    rho[i] = s * g.dp();
  }
  return rho;
}

std::vector<double> chi_of(std::span<const double> w, const PhaseSpaceGrid& g, XModel model,
                           const PhysicalParams& params, const PotentialSpec& pot) {
  std::vector<double> chi(g.nx(), 0.0);
  const double h2m = params.hbar() * params.hbar() / params.mass();
  switch (model.kind) {
    case XModelKind::none:
      break;
    case XModelKind::coffey:
      if (!(params.kT() > 0.0)) throw InvalidArgument("the Coffey operator needs kT > 0");
      for (std::size_t i = 0; i < g.nx(); ++i)
        chi[i] = h2m * pot.derivative(2, g.x(i)) / (12.0 * params.kT());
      break;
    case XModelKind::gaussian_nonlinear: {
      auto rho = x_marginal_raw(w, g);
      for (double r : rho) {
        if (r < kMarginalFloor) throw NumericalError("x-marginal is negative");
      }
      for (double& r : rho) r = std::max(r, 0.0);
      auto mask = evaluation_mask(rho);
      auto d1 = derivative(rho, 1, g.x_grid());
      auto d2 = derivative(rho, 2, g.x_grid());
      for (std::size_t i = 0; i < g.nx(); ++i) {
        if (!mask[i]) continue;
        double l1 = d1[i] / rho[i];
        chi[i] = -0.25 * h2m * (d2[i] / rho[i] - l1 * l1);
      }
      flat_extrapolate(chi, mask, true);
      break;
    }
  }
  return chi;
}

}  // namespace

PhaseSpaceGrid::PhaseSpaceGrid(Grid1D x, std::size_t n_p, double p_max)
    : x_(std::move(x)), n_p_(n_p), p_max_(p_max) {
  if (!x_.periodic()) throw InvalidArgument("phase-space x-grid must be periodic");
  if (n_p_ < 8 || n_p_ % 2 != 0) throw InvalidArgument("n_p must be even and at least 8");
  if (!(p_max_ > 0.0) || !std::isfinite(p_max_)) throw InvalidArgument("p_max must be positive");
}

WignerField::WignerField(PhaseSpaceGrid grid, std::vector<double> values, double time)
    : grid_(std::move(grid)), values_(std::move(values)), time_(time) {
  if (values_.size() != grid_.size()) throw InvalidArgument("field size does not match grid");
  for (double v : values_) {
    if (!std::isfinite(v)) throw NumericalError("phase-space field is not finite");
  }
  if (std::abs(total() - 1.0) > 1e-6) {
    throw InvalidArgument("phase-space field is not normalized: total " + std::to_string(total()));
  }
}

double WignerField::total() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s * grid_.x_grid().dx() * grid_.dp();
}

double WignerField::momentum_edge_ratio() const {
  double peak = 0.0, edge = 0.0;
  for (double v : values_) peak = std::max(peak, std::abs(v));
  for (std::size_t i = 0; i < grid_.nx(); ++i) {
    edge = std::max({edge, std::abs((*this)(i, 0)), std::abs((*this)(i, grid_.np() - 1))});
  }
  return peak > 0.0 ? edge / peak : 0.0;
}

WignerField sample_phase_density(const PhaseSpaceGrid& grid,
                                 const std::function<double(double, double)>& f) {
  std::vector<double> v(grid.size());
  double s = 0.0;
  for (std::size_t i = 0; i < grid.nx(); ++i)
    for (std::size_t j = 0; j < grid.np(); ++j) {
      v[grid.index(i, j)] = f(grid.x(i), grid.p(j));
      s += v[grid.index(i, j)];
    }
  s *= grid.x_grid().dx() * grid.dp();
  if (!(s > 0.0)) throw InvalidArgument("phase-space density has no positive weight");
  for (double& x : v) x /= s;
  return {grid, std::move(v)};
}

WignerField maxwell_boltzmann_field(const PhaseSpaceGrid& grid, const PhysicalParams& params,
                                    const PotentialSpec& pot) {
  if (!(params.kT() > 0.0)) throw InvalidArgument("Boltzmann weight needs kT > 0");
  double u0 = pot.value(0.0);
  for (std::size_t i = 0; i < grid.nx(); ++i) u0 = std::min(u0, pot.value(grid.x(i)));
  const double m = params.mass(), kT = params.kT();
  return sample_phase_density(grid, [&](double x, double p) {
    return std::exp(-(p * p / (2.0 * m) + pot.value(x) - u0) / kT);
  });
}

WignerField wigner_transform(const WaveFunction& psi, const PhaseSpaceGrid& grid,
                             const PhysicalParams& params) {
  if (!(psi.grid() == grid.x_grid())) throw InvalidArgument("wave function grid differs");
  const std::size_t n = grid.nx();
  const double dx = grid.x_grid().dx(), h = params.hbar();
  if (grid.p_max() > std::numbers::pi * h / (2.0 * dx) * (1.0 + 1e-12)) {
    throw InvalidArgument("p_max exceeds pi hbar / (2 dx); the transform would alias");
  }
  // The wave function is taken as zero outside the grid, so shifts s and -s
  // pair into complex conjugates and no periodic image enters the sum.
  const auto nl = static_cast<long>(n);
  std::vector<double> w(grid.size());
  double peak = 0.0, imag_peak = 0.0;
  std::vector<cplx> prod(2 * n);
  std::vector<cplx> rot(grid.np());
  for (std::size_t j = 0; j < grid.np(); ++j) rot[j] = std::polar(1.0, 2.0 * grid.p(j) * dx / h);
  for (std::size_t i = 0; i < n; ++i) {
    const auto il = static_cast<long>(i);
    const long reach = std::min(il, nl - 1 - il);
    for (long s = -reach; s <= reach; ++s)
      prod[static_cast<std::size_t>(s + reach)] = std::conj(psi[il + s]) * psi[il - s];
    for (std::size_t j = 0; j < grid.np(); ++j) {
      cplx z = std::pow(rot[j], -static_cast<double>(reach));
      cplx acc = 0.0;
      for (long k = 0; k <= 2 * reach; ++k) {
        acc += prod[static_cast<std::size_t>(k)] * z;
        z *= rot[j];
      }
      acc *= dx / (std::numbers::pi * h);
      w[grid.index(i, j)] = acc.real();
      peak = std::max(peak, std::abs(acc.real()));
      imag_peak = std::max(imag_peak, std::abs(acc.imag()));
    }
  }
  if (imag_peak > 1e-10 * peak) {
    throw NumericalError("Wigner transform has an imaginary residue of " +
                         std::to_string(imag_peak / peak) + " relative");
  }
  // Renormalize away the rounding of the discrete sum.
  double total = 0.0;
  for (double v : w) total += v;
  total *= dx * grid.dp();
  for (double& v : w) v /= total;
  return {grid, std::move(w)};
}

std::vector<double> moyal_rhs(const WignerField& w, const PotentialSpec& pot,
                              const PhysicalParams& params, bool quantum) {
  const auto& g = w.grid();
  SpectralOps ops(g);
  const int K = highest_moyal_order(pot, quantum);
  std::vector<double> out(g.size()), dxw(g.size());
  ops.p_multiply(w.values().data(), out.data(), [&](std::size_t i, std::size_t q) {
    if (ops.p_nyquist(q)) return cplx(0.0);
    cplx ik(0.0, ops.kp[q]), sum = 0.0;
    for (int k = 0; k <= K; ++k)
      sum += moyal_coefficient(k, params.hbar()) * pot.derivative(2 * k + 1, g.x(i)) *
             std::pow(ik, 2 * k + 1);
    return sum;
  });
  ops.x_derivative(w.values().data(), dxw.data());
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t j = 0; j < g.np(); ++j)
      out[g.index(i, j)] -= g.p(j) / params.mass() * dxw[g.index(i, j)];
  return out;
}

std::vector<double> quantum_force_term(const WignerField& w, const PotentialSpec& pot,
                                       const PhysicalParams& params) {
  const auto& g = w.grid();
  std::vector<double> out(g.size(), 0.0);
  const int K = highest_moyal_order(pot, true);
  if (K == 0 || params.hbar() == 0.0) return out;
  SpectralOps ops(g);
  ops.p_multiply(w.values().data(), out.data(), [&](std::size_t i, std::size_t q) {
    cplx ik(0.0, ops.kp[q]), sum = 0.0;
    for (int k = 1; k <= K; ++k)
      sum -= moyal_coefficient(k, params.hbar()) * pot.derivative(2 * k + 1, g.x(i)) *
             std::pow(ik, 2 * k);
    return sum;
  });
  return out;
}

std::vector<double> x_model_coefficient(const WignerField& w, XModel model,
                                        const PhysicalParams& params, const PotentialSpec& pot) {
  return chi_of(w.values(), w.grid(), model, params, pot);
}

std::vector<double> apply_x_model(const WignerField& w, XModel model,
                                  const PhysicalParams& params, const PotentialSpec& pot) {
  const auto& g = w.grid();
  std::vector<double> out(g.size(), 0.0);
  if (model.kind == XModelKind::none) return out;
  auto chi = chi_of(w.values(), g, model, params, pot);
  SpectralOps ops(g);
  ops.p_multiply(w.values().data(), out.data(), [&](std::size_t i, std::size_t q) {
    return ops.p_nyquist(q) ? cplx(0.0) : cplx(0.0, chi[i] * ops.kp[q]);
  });
  return out;
}

Marginals marginals(const WignerField& w) {
  const auto& g = w.grid();
  auto rho = x_marginal_raw(w.values(), g);
  for (double& r : rho) {
    if (r < kMarginalFloor) {
      throw NumericalError("x-marginal is negative beyond tolerance: " + std::to_string(r));
    }
    r = std::max(r, 0.0);
  }
  std::vector<double> phi(g.np(), 0.0);
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t j = 0; j < g.np(); ++j) phi[j] += w(i, j) * g.x_grid().dx();
  double sp = 0.0;
  for (double v : phi) sp += v * g.dp();
  for (double& v : phi) v /= sp;
  return {normalize(g.x_grid(), std::move(rho)).field, std::move(phi)};
}

struct PhaseSpaceSolver::Workspace {
  explicit Workspace(const PhaseSpaceGrid& g) : ops(g) {}
  SpectralOps ops;
  std::vector<cplx> moyal;  // per (row, bin) multiplier of the Moyal series
  std::vector<double> scratch, pw, stage, k1, k2, k3, k4;
  std::vector<double> chi;
};

PhaseSpaceSolver::PhaseSpaceSolver(const WignerField& w0, const PhysicalParams& params,
                                   PotentialSpec pot, PhaseSpaceOptions options)
    : grid_(w0.grid()),
      params_(params),
      pot_(std::move(pot)),
      options_(options),
      w_(w0.values().begin(), w0.values().end()),
      time_(w0.time()) {
  if (options_.friction && !(params_.friction() > 0.0)) {
    throw InvalidArgument("friction terms need b > 0");
  }
  ws_ = std::make_unique<Workspace>(grid_);
  auto& ops = ws_->ops;
  const std::size_t nb = ops.bins(), n = grid_.size();
  const int K = highest_moyal_order(pot_, options_.quantum);
  ws_->moyal.resize(grid_.nx() * nb);
  for (std::size_t i = 0; i < grid_.nx(); ++i)
    for (std::size_t q = 0; q < nb; ++q) {
      cplx sum = 0.0;
      if (!ops.p_nyquist(q)) {
        cplx ik(0.0, ops.kp[q]);
        for (int k = 0; k <= K; ++k)
          sum += moyal_coefficient(k, params_.hbar()) * pot_.derivative(2 * k + 1, grid_.x(i)) *
                 std::pow(ik, 2 * k + 1);
      }
      ws_->moyal[i * nb + q] = sum;
    }
  for (auto* v : {&ws_->scratch, &ws_->pw, &ws_->stage, &ws_->k1, &ws_->k2, &ws_->k3, &ws_->k4})
    v->resize(n);
  ws_->chi = chi_of(w_, grid_, options_.x_model, params_, pot_);
  for (double c : ws_->chi) max_chi_ = std::max(max_chi_, std::abs(c));
}

PhaseSpaceSolver::~PhaseSpaceSolver() = default;

double PhaseSpaceSolver::max_dt() const {
  const double m = params_.mass(), h = params_.hbar();
  const double kx_max = std::numbers::pi / grid_.x_grid().dx();
  const double kp_max = std::numbers::pi / grid_.dp();
  double lam = grid_.p_max() / m * kx_max;
  const int K = highest_moyal_order(pot_, options_.quantum);
  for (int k = 0; k <= K; ++k) {
    double u = 0.0;
    for (std::size_t i = 0; i < grid_.nx(); ++i)
      u = std::max(u, std::abs(pot_.derivative(2 * k + 1, grid_.x(i))));
    lam += std::abs(moyal_coefficient(k, h)) * u * std::pow(kp_max, 2 * k + 1);
  }
  if (options_.friction) {
    const double b = params_.friction();
    lam += b * (params_.kT() + max_chi_) * kp_max * kp_max +
           b / m * (1.0 + grid_.p_max() * kp_max);
  }
  return 2.0 / lam;
}

void PhaseSpaceSolver::rhs(std::span<const double> w, std::span<double> out) {
  auto& ops = ws_->ops;
  const std::size_t nb = ops.bins(), nx = grid_.nx(), np = grid_.np();
  const double m = params_.mass(), b = params_.friction();
  const bool fric = options_.friction;

  if (fric && options_.x_model.kind == XModelKind::gaussian_nonlinear) {
    ws_->chi = chi_of(w, grid_, options_.x_model, params_, pot_);
    for (double c : ws_->chi) max_chi_ = std::max(max_chi_, std::abs(c));
  }

  // The friction drift d/dp (p W) is applied in the skew-symmetric form
  // (1/2)[d/dp (p W) + p dW/dp] + W/2. With a sawtooth p on the periodic
  // momentum grid the plain conservative form has growing modes when no
  // momentum diffusion damps them.
  ops.p_axis.forward(w.data(), ops.hat.data());
  if (fric) {
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < np; ++j) ws_->pw[i * np + j] = grid_.p(j) * w[i * np + j];
    ops.p_axis.forward(ws_->pw.data(), ops.hat2.data());
  }
  const double half_drift = 0.5 * b / m;
  for (std::size_t i = 0; i < nx; ++i) {
    const double diffusion = fric ? b * (params_.kT() + ws_->chi[i]) : 0.0;
    for (std::size_t q = 0; q < nb; ++q) {
      const std::size_t k = i * nb + q;
      const double kp = ops.kp[q];
      const bool nyq = ops.p_nyquist(q);
      cplx mult = ws_->moyal[k] - diffusion * kp * kp;
      cplx acc = mult * ops.hat[k];
      if (fric) {
        cplx ik = nyq ? cplx(0.0) : cplx(0.0, kp);
        acc += half_drift * ik * ops.hat2[k];
        ops.hat2[k] = ik * ops.hat[k];
      }
      ops.hat[k] = acc;
    }
  }
  ops.p_axis.backward(ops.hat.data(), out.data());
  if (fric) {
    ops.p_axis.backward(ops.hat2.data(), ws_->pw.data());
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < np; ++j) {
        const std::size_t k = i * np + j;
        out[k] += half_drift * (grid_.p(j) * ws_->pw[k] + w[k]);
      }
  }

  ops.x_derivative(w.data(), ws_->scratch.data());
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < np; ++j)
      out[i * np + j] -= grid_.p(j) / m * ws_->scratch[i * np + j];
}

void PhaseSpaceSolver::step(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("time step must be positive");
  if (dt > max_dt() * (1.0 + 1e-12)) {
    throw NumericalError("time step " + std::to_string(dt) + " exceeds the stability bound " +
                         std::to_string(max_dt()));
  }
  const std::size_t n = w_.size();
  auto& s = ws_->stage;
  double before = 0.0;
  for (double v : w_) before += v;

  rhs(w_, ws_->k1);
  for (std::size_t k = 0; k < n; ++k) s[k] = w_[k] + 0.5 * dt * ws_->k1[k];
  rhs(s, ws_->k2);
  for (std::size_t k = 0; k < n; ++k) s[k] = w_[k] + 0.5 * dt * ws_->k2[k];
  rhs(s, ws_->k3);
  for (std::size_t k = 0; k < n; ++k) s[k] = w_[k] + dt * ws_->k3[k];
  rhs(s, ws_->k4);
  double after = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    w_[k] += dt / 6.0 * (ws_->k1[k] + 2.0 * ws_->k2[k] + 2.0 * ws_->k3[k] + ws_->k4[k]);
    after += w_[k];
  }
  const double cell = grid_.x_grid().dx() * grid_.dp();
  if (!std::isfinite(after)) throw NumericalError("phase-space field became non-finite");
  if (std::abs(after - before) * cell > kMaxWeightDrift) {
    throw NumericalError("total weight drifted by " +
                         std::to_string((after - before) * cell) + " in one step");
  }
  time_ += dt;
}

void PhaseSpaceSolver::advance_to(double t_target, double dt_max) {
  double remaining = t_target - time_;
  if (remaining <= 0.0) return;
  double cap = std::min(dt_max, max_dt());
  auto steps = std::max(1L, static_cast<long>(std::ceil(remaining / cap * (1.0 - 1e-12))));
  double dt = remaining / static_cast<double>(steps);
  for (long k = 0; k < steps; ++k) step(dt);
  time_ = t_target;
}

void PhaseSpaceSolver::check_boundary() const {
  double peak = 0.0, edge = 0.0;
  const std::size_t np = grid_.np();
  for (double v : w_) peak = std::max(peak, std::abs(v));
  for (std::size_t i = 0; i < grid_.nx(); ++i)
    edge = std::max({edge, std::abs(w_[i * np]), std::abs(w_[i * np + np - 1])});
  if (edge > kEdgeTolerance * peak) {
    throw NumericalError("phase-space density reached the momentum boundary at t = " +
                         std::to_string(time_));
  }
}

WignerField PhaseSpaceSolver::field() const { return {grid_, w_, time_}; }

WignerField step_phase_space(const WignerField& w, const PhysicalParams& params,
                             const PotentialSpec& pot, double dt, bool quantum, bool friction,
                             XModel x_model) {
  PhaseSpaceSolver solver(w, params, pot, {quantum, friction, x_model});
  solver.step(dt);
  return solver.field();
}

void write_wigner_binary(std::ostream& out, const WignerField& w) {
  static_assert(std::endian::native == std::endian::little, "binary layout assumes little endian");
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(w.grid().nx()),
                                 static_cast<std::uint32_t>(w.grid().np())};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(w.values().data()),
            static_cast<std::streamsize>(w.values().size() * sizeof(double)));
  if (!out) throw IoError("failed to write phase-space snapshot");
}

void write_wigner_csv(std::ostream& out, const WignerField& w) {
  csv::header(out, {"x", "p", "W"});
  const auto& g = w.grid();
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t j = 0; j < g.np(); ++j) csv::row(out, {g.x(i), g.p(j), w(i, j)});
  if (!out) throw IoError("failed to write phase-space CSV");
}

}  // namespace dqm
