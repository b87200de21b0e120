#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "dqm/core.hpp"

namespace dqm {

/// Periodic x-grid times a uniform momentum grid p_j = -p_max + j dp, j < n_p.
class PhaseSpaceGrid {
 public:
  PhaseSpaceGrid(Grid1D x, std::size_t n_p, double p_max);

  const Grid1D& x_grid() const { return x_; }
  std::size_t nx() const { return x_.size(); }
  std::size_t np() const { return n_p_; }
  double p_max() const { return p_max_; }
  double dp() const { return 2.0 * p_max_ / static_cast<double>(n_p_); }
  double x(std::size_t i) const { return x_.x(i); }
  double p(std::size_t j) const { return -p_max_ + dp() * static_cast<double>(j); }
  std::size_t size() const { return nx() * n_p_; }
  std::size_t index(std::size_t i, std::size_t j) const { return i * n_p_ + j; }

  friend bool operator==(const PhaseSpaceGrid&, const PhaseSpaceGrid&) = default;

 private:
  Grid1D x_;
  std::size_t n_p_;
  double p_max_;
};

/// Quasi-probability W(x_i, p_j), row-major with x as the slow index.
class WignerField {
 public:
  /// Validates unit total weight within 1e-6.
  WignerField(PhaseSpaceGrid grid, std::vector<double> values, double time = 0.0);

  const PhaseSpaceGrid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[grid_.index(i, j)]; }
  double time() const { return time_; }
  double total() const;
  /// Largest |W| on the outermost momentum rows relative to max |W|.
  double momentum_edge_ratio() const;

 private:
  PhaseSpaceGrid grid_;
  std::vector<double> values_;
  double time_;
};

/// Samples f(x, p) and normalizes the total weight to one.
WignerField sample_phase_density(const PhaseSpaceGrid& grid,
                                 const std::function<double(double, double)>& f);

/// Classical Boltzmann weight exp(-(p^2/2m + U)/kT), normalized on the grid.
WignerField maxwell_boltzmann_field(const PhaseSpaceGrid& grid, const PhysicalParams& params,
                                    const PotentialSpec& pot);

enum class XModelKind { none, coffey, gaussian_nonlinear };

/// Thermo-quantum momentum operator X W = chi(x) dW/dp inserted next to kT dW/dp.
struct XModel {
  XModelKind kind = XModelKind::none;
};

/// W(x, p) = (1/pi hbar) sum_s psi*(x + s dx) psi(x - s dx) exp(2 i p s dx / hbar) dx.
/// The momentum grid must fit in one period of the discrete transform,
/// p_max <= pi hbar / (2 dx). Throws NumericalError when the imaginary
/// residue exceeds 1e-10 of max |W|.
WignerField wigner_transform(const WaveFunction& psi, const PhaseSpaceGrid& grid,
                             const PhysicalParams& params);

/// -(p/m) dW/dx + sum_k (hbar/2i)^{2k}/(2k+1)! U^{(2k+1)} d^{2k+1}W/dp^{2k+1},
/// exact for polynomial U. `quantum = false` keeps only k = 0.
std::vector<double> moyal_rhs(const WignerField& w, const PotentialSpec& pot,
                              const PhysicalParams& params, bool quantum);

/// -sum_{k>=1} (hbar/2i)^{2k}/(2k+1)! U^{(2k+1)} d^{2k}W/dp^{2k}; exactly zero
/// for potentials of degree <= 2 and for hbar = 0.
std::vector<double> quantum_force_term(const WignerField& w, const PotentialSpec& pot,
                                       const PhysicalParams& params);

/// chi(x) per model: coffey hbar^2 U''/(12 m kT); gaussian_nonlinear
/// -(hbar^2/4m)(ln rho)'' of the x-marginal; none 0.
std::vector<double> x_model_coefficient(const WignerField& w, XModel model,
                                        const PhysicalParams& params, const PotentialSpec& pot);

/// The field X W = chi(x) dW/dp.
std::vector<double> apply_x_model(const WignerField& w, XModel model,
                                  const PhysicalParams& params, const PotentialSpec& pot);

struct Marginals {
  DensityField x;
  std::vector<double> p;  // density over the momentum grid
};

/// Throws NumericalError when the x-marginal is below -1e-8 anywhere; values
/// in [-1e-8, 0) are set to zero before renormalizing.
Marginals marginals(const WignerField& w);

struct PhaseSpaceOptions {
  bool quantum = true;
  bool friction = true;
  XModel x_model{};
};

/// Explicit fourth-order Runge-Kutta stepper for
///   dW/dt = moyal_rhs + b d/dp [ (p/m) W + (kT + chi) dW/dp ].
/// Spectral in x and p; every term is a derivative, so the total weight is
/// conserved to rounding.
class PhaseSpaceSolver {
 public:
  PhaseSpaceSolver(const WignerField& w0, const PhysicalParams& params, PotentialSpec pot,
                   PhaseSpaceOptions options);
  ~PhaseSpaceSolver();
  PhaseSpaceSolver(const PhaseSpaceSolver&) = delete;
  PhaseSpaceSolver& operator=(const PhaseSpaceSolver&) = delete;

  /// One step. Throws NumericalError if dt exceeds max_dt() or the weight
  /// drifts by more than 1e-10.
  void step(double dt);
  void advance_to(double t_target, double dt_max);
  /// Throws NumericalError when |W| at the momentum edges exceeds 1e-10 max |W|.
  void check_boundary() const;

  /// 2 / (sum of the spectral radii of the active terms), inside the RK4
  /// stability region on both the imaginary and negative real axes.
  double max_dt() const;
  double time() const { return time_; }
  WignerField field() const;
  std::span<const double> values() const { return w_; }
  void rhs(std::span<const double> w, std::span<double> out);

 private:
  struct Workspace;
  PhaseSpaceGrid grid_;
  PhysicalParams params_;
  PotentialSpec pot_;
  PhaseSpaceOptions options_;
  std::vector<double> w_;
  double time_ = 0.0;
  double max_chi_ = 0.0;
  std::unique_ptr<Workspace> ws_;
};

WignerField step_phase_space(const WignerField& w, const PhysicalParams& params,
                             const PotentialSpec& pot, double dt, bool quantum, bool friction,
                             XModel x_model);

/// uint32 nx, uint32 np (little endian), then nx*np doubles row-major.
void write_wigner_binary(std::ostream& out, const WignerField& w);
/// x, p, W.
void write_wigner_csv(std::ostream& out, const WignerField& w);

}  // namespace dqm
