#include "dqm/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dqm/error.hpp"
#include "dqm/fft.hpp"

namespace dqm {

namespace {

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

PhysicalParams::PhysicalParams(double mass, double friction, double kT, double hbar)
    : mass_(mass), friction_(friction), kT_(kT), hbar_(hbar) {
  if (!(std::isfinite(mass) && mass > 0.0)) throw InvalidArgument("mass must be finite and > 0");
  if (!finite_nonneg(friction)) throw InvalidArgument("friction b must be finite and >= 0");
  if (!finite_nonneg(kT)) throw InvalidArgument("kT must be finite and >= 0");
  if (!finite_nonneg(hbar)) throw InvalidArgument("hbar must be finite and >= 0");
}

double PhysicalParams::diffusion() const {
  if (friction_ <= 0.0) throw InvalidArgument("diffusion constant kT/b undefined for b = 0");
  return kT_ / friction_;
}

double PhysicalParams::lambda_thermal() const {
  if (kT_ <= 0.0) throw InvalidArgument("thermal de Broglie length undefined for kT = 0");
  return hbar_ / (2.0 * std::sqrt(mass_ * kT_));
}

PotentialSpec::PotentialSpec(std::vector<double> coefficients) : coeffs_(std::move(coefficients)) {
  for (double c : coeffs_)
    if (!std::isfinite(c)) throw InvalidArgument("potential coefficients must be finite");
  while (!coeffs_.empty() && coeffs_.back() == 0.0) coeffs_.pop_back();
}

PotentialSpec PotentialSpec::free() { return PotentialSpec{}; }

PotentialSpec PotentialSpec::harmonic(double mass, double omega0) {
  return PotentialSpec({0.0, 0.0, 0.5 * mass * omega0 * omega0});
}

PotentialSpec PotentialSpec::quartic(double a4) { return PotentialSpec({0.0, 0.0, 0.0, 0.0, a4}); }

PotentialSpec PotentialSpec::double_well(double a4, double a2) {
  return PotentialSpec({0.0, 0.0, -a2, 0.0, a4});
}

int PotentialSpec::degree() const {
  return coeffs_.empty() ? 0 : static_cast<int>(coeffs_.size()) - 1;
}

double PotentialSpec::value(double x) const {
  double acc = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
  return acc;
}

PotentialSpec PotentialSpec::differentiated(int order) const {
  if (order < 0) throw InvalidArgument("derivative order must be >= 0");
  std::vector<double> c = coeffs_;
  for (int k = 0; k < order && !c.empty(); ++k) {
    std::vector<double> d(c.size() > 1 ? c.size() - 1 : 0);
    for (std::size_t j = 1; j < c.size(); ++j) d[j - 1] = c[j] * static_cast<double>(j);
    c = std::move(d);
  }
  return PotentialSpec(std::move(c));
}

double PotentialSpec::derivative(int order, double x) const {
  return differentiated(order).value(x);
}

double PotentialSpec::harmonic_frequency(double mass) const {
  if (degree() > 2) throw InvalidArgument("potential is not quadratic");
  const double c2 = coeffs_.size() > 2 ? coeffs_[2] : 0.0;
  if (c2 < 0.0) throw InvalidArgument("inverted quadratic potential has no frequency");
  return std::sqrt(2.0 * c2 / mass);
}

std::vector<double> Grid1D::nodes() const {
  std::vector<double> xs(n_);
  for (std::size_t i = 0; i < n_; ++i) xs[i] = x(i);
  return xs;
}

Grid1D build_grid(double x_min, double x_max, std::size_t n, Boundary mode) {
  if (!std::isfinite(x_min) || !std::isfinite(x_max))
    throw InvalidArgument("grid bounds must be finite");
  if (!(x_max > x_min)) throw InvalidArgument("grid requires x_max > x_min");
  if (n < 8) throw InvalidArgument("grid requires n >= 8");
  const double span = x_max - x_min;
  const double dx = mode == Boundary::periodic ? span / static_cast<double>(n)
                                               : span / static_cast<double>(n - 1);
  return Grid1D(x_min, x_max, n, mode, dx);
}

double integrate(std::span<const double> f, const Grid1D& grid) {
  double sum = 0.0;
  for (double v : f) sum += v;
  if (!grid.periodic()) sum -= 0.5 * (f.front() + f.back());
  return sum * grid.dx();
}

DensityField::DensityField(Grid1D grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw InvalidArgument("density size does not match grid");
  for (double v : values_)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw InvalidArgument("density values must be finite and >= 0");
  const double mass = integrate(values_, grid_);
  if (std::abs(mass - 1.0) > 1e-8) {
    std::ostringstream os;
    os << "density is not normalized (integral = " << mass << ")";
    throw InvalidArgument(os.str());
  }
}

double DensityField::max() const { return *std::max_element(values_.begin(), values_.end()); }

WaveFunction::WaveFunction(Grid1D grid, std::vector<cplx> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw InvalidArgument("wave function size does not match grid");
  const auto rho = density();
  for (double v : rho)
    if (!std::isfinite(v)) throw InvalidArgument("wave function values must be finite");
  const double norm = integrate(rho, grid_);
  if (std::abs(norm - 1.0) > 1e-8) {
    std::ostringstream os;
    os << "wave function is not normalized (norm = " << norm << ")";
    throw InvalidArgument(os.str());
  }
}

std::vector<double> WaveFunction::density() const {
  std::vector<double> rho(values_.size());
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = std::norm(values_[i]);
  return rho;
}

Normalized<DensityField> normalize(const Grid1D& grid, std::vector<double> values) {
  if (values.size() != grid.size()) throw InvalidArgument("density size does not match grid");
  const double mass = integrate(values, grid);
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw InvalidArgument("cannot normalize a field with zero or negative total mass");
  for (auto& v : values) v /= mass;
  return {DensityField(grid, std::move(values)), mass};
}

Normalized<WaveFunction> normalize(const Grid1D& grid, std::vector<cplx> values) {
  if (values.size() != grid.size())
    throw InvalidArgument("wave function size does not match grid");
  std::vector<double> rho(values.size());
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = std::norm(values[i]);
  const double norm = integrate(rho, grid);
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw InvalidArgument("cannot normalize a wave function with zero norm");
  const double scale = 1.0 / std::sqrt(norm);
  for (auto& v : values) v *= scale;
  return {WaveFunction(grid, std::move(values)), norm};
}

Normalized<DensityField> normalize(const DensityField& rho) {
  return normalize(rho.grid(), std::vector<double>(rho.values().begin(), rho.values().end()));
}

Normalized<WaveFunction> normalize(const WaveFunction& psi) {
  return normalize(psi.grid(), std::vector<cplx>(psi.values().begin(), psi.values().end()));
}

double edge_ratio(std::span<const double> rho) {
  double peak = 0.0;
  for (double v : rho) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) return 0.0;
  return std::max(std::abs(rho.front()), std::abs(rho.back())) / peak;
}

DensityField gaussian_density(double mean, double variance, const Grid1D& grid) {
  if (!(variance > 0.0) || !std::isfinite(variance))
    throw InvalidArgument("Gaussian variance must be > 0");
  if (!std::isfinite(mean)) throw InvalidArgument("Gaussian mean must be finite");
  std::vector<double> rho(grid.size());
  const double pref = 1.0 / std::sqrt(2.0 * std::numbers::pi * variance);
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double d = grid.x(i) - mean;
    rho[i] = pref * std::exp(-0.5 * d * d / variance);
  }
  // Compare against the analytic peak so an off-grid maximum cannot hide truncation.
  const double edge = std::max(rho.front(), rho.back()) / pref;
  if (edge > 1e-12) {
    std::ostringstream os;
    os << "grid truncates the Gaussian: boundary density is " << edge << " of the peak";
    throw InvalidArgument(os.str());
  }
  return normalize(grid, std::move(rho)).field;
}

namespace {

template <typename T>
std::vector<T> spectral_derivative(std::span<const T> f, int order, const Grid1D& grid) {
  const std::size_t n = f.size();
  std::vector<cplx> work(f.begin(), f.end());
  fft::forward(work);
  const cplx i_unit(0.0, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    if ((order % 2 == 1) && 2 * j == n) {
      work[j] = 0.0;
      continue;
    }
    const double k = fft::wavenumber(j, n, grid.length());
    work[j] *= std::pow(i_unit * k, order);
  }
  fft::backward(work);
  std::vector<T> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    if constexpr (std::is_same_v<T, double>)
      out[j] = work[j].real();
    else
      out[j] = work[j];
  }
  return out;
}

template <typename T>
std::vector<T> fd_first(std::span<const T> f, double h) {
  const std::size_t n = f.size();
  std::vector<T> d(n);
  const double c = 1.0 / (12.0 * h);
  d[0] = c * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]);
  d[1] = c * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]);
  for (std::size_t i = 2; i + 2 < n; ++i)
    d[i] = c * (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]);
  const std::size_t m = n - 1;
  d[m - 1] = -c * (-3.0 * f[m] - 10.0 * f[m - 1] + 18.0 * f[m - 2] - 6.0 * f[m - 3] + f[m - 4]);
  d[m] = -c * (-25.0 * f[m] + 48.0 * f[m - 1] - 36.0 * f[m - 2] + 16.0 * f[m - 3] - 3.0 * f[m - 4]);
  return d;
}

template <typename T>
std::vector<T> fd_second(std::span<const T> f, double h) {
  const std::size_t n = f.size();
  std::vector<T> d(n);
  const double c = 1.0 / (12.0 * h * h);
  d[0] = c * (45.0 * f[0] - 154.0 * f[1] + 214.0 * f[2] - 156.0 * f[3] + 61.0 * f[4] - 10.0 * f[5]);
  d[1] = c * (10.0 * f[0] - 15.0 * f[1] - 4.0 * f[2] + 14.0 * f[3] - 6.0 * f[4] + f[5]);
  for (std::size_t i = 2; i + 2 < n; ++i)
    d[i] = c * (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]);
  const std::size_t m = n - 1;
  d[m - 1] = c * (10.0 * f[m] - 15.0 * f[m - 1] - 4.0 * f[m - 2] + 14.0 * f[m - 3] - 6.0 * f[m - 4] + f[m - 5]);
  d[m] = c * (45.0 * f[m] - 154.0 * f[m - 1] + 214.0 * f[m - 2] - 156.0 * f[m - 3] + 61.0 * f[m - 4] - 10.0 * f[m - 5]);
  return d;
}

template <typename T>
std::vector<T> fd_derivative(std::span<const T> f, int order, const Grid1D& grid) {
  std::vector<T> cur(f.begin(), f.end());
  int remaining = order;
  if (remaining % 2 == 1) {
    cur = fd_first<T>(cur, grid.dx());
    --remaining;
  }
  for (; remaining > 0; remaining -= 2) cur = fd_second<T>(cur, grid.dx());
  return cur;
}

template <typename T>
std::vector<T> derivative_impl(std::span<const T> f, int order, const Grid1D& grid) {
  if (order < 1) throw InvalidArgument("derivative order must be >= 1");
  if (f.size() != grid.size()) throw InvalidArgument("field size does not match grid");
  return grid.periodic() ? spectral_derivative<T>(f, order, grid)
                         : fd_derivative<T>(f, order, grid);
}

}  // namespace

std::vector<double> derivative(std::span<const double> f, int order, const Grid1D& grid) {
  return derivative_impl<double>(f, order, grid);
}

std::vector<cplx> derivative(std::span<const cplx> f, int order, const Grid1D& grid) {
  return derivative_impl<cplx>(f, order, grid);
}

Moments moments(std::span<const double> rho, const Grid1D& grid) {
  if (rho.size() != grid.size()) throw InvalidArgument("density size does not match grid");
  const double norm = integrate(rho, grid);
  if (std::abs(norm - 1.0) > 1e-6) {
    std::ostringstream os;
    os << "moments require a normalized density (integral = " << norm << ")";
    throw InvalidArgument(os.str());
  }
  std::vector<double> w(rho.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = grid.x(i) * rho[i];
  const double mean = integrate(w, grid) / norm;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = grid.x(i) - mean;
    w[i] = d * d * rho[i];
  }
  return {mean, integrate(w, grid) / norm};
}

Moments moments(const DensityField& rho) { return moments(rho.values(), rho.grid()); }

}  // namespace dqm
