#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace dqm {

using cplx = std::complex<double>;

/// Particle and bath parameters in a consistent unit system (default hbar = m = 1).
///
/// Friction and temperature may vanish; the derived quantities that divide by
/// them throw instead of returning infinities. hbar = 0 is the classical limit.
class PhysicalParams {
 public:
  PhysicalParams() = default;
  PhysicalParams(double mass, double friction, double kT, double hbar);

  double mass() const { return mass_; }
  double friction() const { return friction_; }
  double kT() const { return kT_; }
  double hbar() const { return hbar_; }

  /// Einstein diffusion constant kT/b. Throws InvalidArgument when b = 0.
  double diffusion() const;
  /// Thermal de Broglie length hbar / (2 sqrt(m kT)). Throws when kT = 0.
  double lambda_thermal() const;

  PhysicalParams with_mass(double m) const { return {m, friction_, kT_, hbar_}; }
  PhysicalParams with_friction(double b) const { return {mass_, b, kT_, hbar_}; }
  PhysicalParams with_kT(double kT) const { return {mass_, friction_, kT, hbar_}; }
  PhysicalParams with_hbar(double hbar) const { return {mass_, friction_, kT_, hbar}; }

 private:
  double mass_ = 1.0;
  double friction_ = 0.0;
  double kT_ = 0.0;
  double hbar_ = 1.0;
};

/// Polynomial external potential U(x) = sum_j c_j x^j.
class PotentialSpec {
 public:
  PotentialSpec() = default;
  explicit PotentialSpec(std::vector<double> coefficients);

  static PotentialSpec free();
  static PotentialSpec harmonic(double mass, double omega0);
  static PotentialSpec quartic(double a4);
  /// a4 x^4 - a2 x^2, minima at x = +-sqrt(a2 / (2 a4)).
  static PotentialSpec double_well(double a4, double a2);

  const std::vector<double>& coefficients() const { return coeffs_; }
  /// Highest power with a non-zero coefficient; 0 for the free particle.
  int degree() const;
  double value(double x) const;
  /// k-th derivative at x; exact, zero for k above the degree.
  double derivative(int order, double x) const;
  PotentialSpec differentiated(int order) const;
  /// mU''(0) = m omega0^2 for a quadratic potential; returns omega0 (0 if free).
  double harmonic_frequency(double mass) const;
  bool is_quadratic_or_less() const { return degree() <= 2; }

 private:
  std::vector<double> coeffs_;
};

enum class Boundary { periodic, clamped };

/// Uniform grid on [x_min, x_max). Periodic grids exclude x_max; clamped grids
/// include both ends.
class Grid1D {
 public:
  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  std::size_t size() const { return n_; }
  double dx() const { return dx_; }
  Boundary boundary() const { return mode_; }
  bool periodic() const { return mode_ == Boundary::periodic; }
  /// Period of the grid (x_max - x_min) for periodic grids.
  double length() const { return x_max_ - x_min_; }
  double x(std::size_t i) const { return x_min_ + dx_ * static_cast<double>(i); }
  std::vector<double> nodes() const;

  friend bool operator==(const Grid1D&, const Grid1D&) = default;

 private:
  friend Grid1D build_grid(double, double, std::size_t, Boundary);
  Grid1D(double x_min, double x_max, std::size_t n, Boundary mode, double dx)
      : x_min_(x_min), x_max_(x_max), n_(n), dx_(dx), mode_(mode) {}

  double x_min_ = 0.0;
  double x_max_ = 1.0;
  std::size_t n_ = 0;
  double dx_ = 0.0;
  Boundary mode_ = Boundary::periodic;
};

Grid1D build_grid(double x_min, double x_max, std::size_t n, Boundary mode);

/// Integral of sampled values: rectangle rule on periodic grids (spectrally
/// accurate), trapezoid on clamped grids.
double integrate(std::span<const double> f, const Grid1D& grid);

/// Non-negative probability density with unit mass.
class DensityField {
 public:
  /// Validates non-negativity and unit norm within 1e-8.
  DensityField(Grid1D grid, std::vector<double> values);

  const Grid1D& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double max() const;

 private:
  Grid1D grid_;
  std::vector<double> values_;
};

/// Complex wave function with unit L2 norm.
class WaveFunction {
 public:
  /// Validates the unit norm within 1e-8.
  WaveFunction(Grid1D grid, std::vector<cplx> values);

  const Grid1D& grid() const { return grid_; }
  std::span<const cplx> values() const { return values_; }
  cplx operator[](std::size_t i) const { return values_[i]; }
  std::vector<double> density() const;

 private:
  Grid1D grid_;
  std::vector<cplx> values_;
};

template <typename Field>
struct Normalized {
  Field field;
  double norm;  // integral before normalization
};

Normalized<DensityField> normalize(const Grid1D& grid, std::vector<double> values);
Normalized<WaveFunction> normalize(const Grid1D& grid, std::vector<cplx> values);
Normalized<DensityField> normalize(const DensityField& rho);
Normalized<WaveFunction> normalize(const WaveFunction& psi);

/// Normalized Gaussian density. Throws when the grid truncates it, i.e. when
/// the boundary density exceeds 1e-12 of the peak.
DensityField gaussian_density(double mean, double variance, const Grid1D& grid);

/// Derivative of the given order. Periodic grids use spectral
/// differentiation; clamped grids use fourth-order centered differences with
/// one-sided end stencils (higher orders by composition).
std::vector<double> derivative(std::span<const double> f, int order, const Grid1D& grid);
std::vector<cplx> derivative(std::span<const cplx> f, int order, const Grid1D& grid);

struct Moments {
  double mean;
  double variance;
};

/// Mean and variance. Throws when the norm deviates from 1 by more than 1e-6.
Moments moments(const DensityField& rho);
Moments moments(std::span<const double> rho, const Grid1D& grid);

/// Largest |rho| at the two ends of the grid relative to max |rho|.
double edge_ratio(std::span<const double> rho);

}  // namespace dqm
