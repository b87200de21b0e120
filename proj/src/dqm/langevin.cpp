#include "dqm/langevin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dqm/csv.hpp"
#include "dqm/error.hpp"
#include "dqm/qpotential.hpp"

namespace dqm {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

double unit_open(std::uint32_t hi_word, std::uint32_t lo_word) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi_word) << 21) | (lo_word >> 11);
  return (static_cast<double>(bits) + 0.5) * 0x1p-53;
}

struct SampleMoments {
  double mean;
  double variance;
};

SampleMoments sample_moments(const std::vector<double>& a) {
  const double n = static_cast<double>(a.size());
  double mean = 0.0;
  for (double v : a) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : a) ss += (v - mean) * (v - mean);
  return {mean, a.size() > 1 ? ss / (n - 1.0) : 0.0};
}

double select_bandwidth(const TrajectoryEnsemble& ens, Bandwidth bandwidth) {
  const auto mx = sample_moments(ens.x);
  const double sigma = std::sqrt(mx.variance);
  if (!(sigma > 1e-12 * std::max(1.0, std::abs(mx.mean))))
    throw NumericalError("degenerate ensemble: zero position spread");
  if (bandwidth.rule == Bandwidth::Rule::fixed) {
    if (!(bandwidth.value > 0.0)) throw InvalidArgument("fixed bandwidth must be positive");
    return bandwidth.value;
  }
  return 1.06 * sigma * std::pow(static_cast<double>(ens.size()), -0.2);
}

// Gaussian kernel K(u)/h and its first three x-derivatives at u = (x - x_i)/h.
std::array<double, 4> kernel_derivatives(double u, double h) {
  const double phi = std::exp(-0.5 * u * u) / (std::sqrt(2.0 * std::numbers::pi) * h);
  return {phi, -u * phi / h, (u * u - 1.0) * phi / (h * h), -(u * u * u - 3.0 * u) * phi / (h * h * h)};
}

double force_from_derivatives(const std::array<double, 4>& r, double c) {
  const double g1 = r[1] / r[0];
  return c * (r[3] / r[0] - 2.0 * g1 * r[2] / r[0] + g1 * g1 * g1);
}

void validate_dt(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kPhiloxW0;
      k[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

std::array<double, 2> philox_normals(std::uint64_t seed, std::uint64_t stream,
                                     std::uint64_t draw) {
  const auto w = philox4x32(
      {static_cast<std::uint32_t>(draw), static_cast<std::uint32_t>(draw >> 32),
       static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
      {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  const double u1 = unit_open(w[0], w[1]);
  const double u2 = unit_open(w[2], w[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(angle), r * std::sin(angle)};
}

GaussianPhaseSpec GaussianPhaseSpec::minimal_uncertainty(const PhysicalParams& params,
                                                         double mean_x, double var_x,
                                                         double mean_v) {
  if (!(var_x > 0.0)) throw InvalidArgument("minimal-uncertainty preset needs var_x > 0");
  const double m = params.mass();
  const double hbar = params.hbar();
  return {mean_x, var_x, mean_v, hbar * hbar / (4.0 * m * m * var_x), 0.0};
}

GaussianPhaseSpec GaussianPhaseSpec::ground_state(const PhysicalParams& params, double omega0,
                                                  double mean_x, double mean_v) {
  if (!(omega0 > 0.0)) throw InvalidArgument("ground-state preset needs omega0 > 0");
  if (!(params.hbar() > 0.0)) throw InvalidArgument("ground-state preset needs hbar > 0");
  return minimal_uncertainty(params, mean_x, params.hbar() / (2.0 * params.mass() * omega0),
                             mean_v);
}

TrajectoryEnsemble sample_wigner_initial(const GaussianPhaseSpec& spec, std::size_t n,
                                         std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("ensemble needs at least one particle");
  const double sxx = spec.var_x, svv = spec.var_v, sxv = spec.cov_xv;
  const double scale = std::max({std::abs(sxx), std::abs(svv), 1e-300});
  if (!(sxx >= 0.0) || !(svv >= 0.0) || sxx * svv - sxv * sxv < -1e-14 * scale * scale)
    throw InvalidArgument("covariance matrix is not positive semi-definite");
  if (sxx == 0.0 && sxv != 0.0)
    throw InvalidArgument("covariance matrix is not positive semi-definite");
  const double l11 = std::sqrt(sxx);
  const double l21 = l11 > 0.0 ? sxv / l11 : 0.0;
  const double l22 = std::sqrt(std::max(0.0, svv - l21 * l21));

  TrajectoryEnsemble ens;
  ens.seed = seed;
  ens.x.resize(n);
  ens.v.resize(n);
  ens.stream.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ens.stream[i] = i;
    const auto z = philox_normals(seed, i, 0);
    ens.x[i] = spec.mean_x + l11 * z[0];
    ens.v[i] = spec.mean_v + l21 * z[0] + l22 * z[1];
  }
  return ens;
}

double meanfield_quantum_force_at(const TrajectoryEnsemble& ens, const PhysicalParams& params,
                                  double h, double x) {
  if (!(h > 0.0)) throw InvalidArgument("bandwidth must be positive");
  std::array<double, 4> r{};
  for (double xi : ens.x) {
    const auto k = kernel_derivatives((x - xi) / h, h);
    for (int m = 0; m < 4; ++m) r[m] += k[m];
  }
  const double c = params.hbar() * params.hbar() / (4.0 * params.mass());
  return force_from_derivatives(r, c);
}

MeanFieldForce meanfield_quantum_force(const TrajectoryEnsemble& ens,
                                       const PhysicalParams& params, Bandwidth bandwidth) {
  const std::size_t n = ens.size();
  if (n < 1000) throw InvalidArgument("mean-field force needs N >= 1000");
  const double h = select_bandwidth(ens, bandwidth);

  const auto [lo_it, hi_it] = std::minmax_element(ens.x.begin(), ens.x.end());
  const double lo = *lo_it - 6.0 * h;
  const double hi = *hi_it + 6.0 * h;
  constexpr std::size_t kMaxNodes = 65536;
  double d = h / 8.0;
  auto nodes = static_cast<std::size_t>(std::ceil((hi - lo) / d)) + 1;
  if (nodes > kMaxNodes) {
    nodes = kMaxNodes;
    d = (hi - lo) / static_cast<double>(nodes - 1);
  }

  std::vector<double> counts(nodes, 0.0);
  for (double xi : ens.x) {
    const double s = (xi - lo) / d;
    const auto j = std::min(static_cast<std::size_t>(s), nodes - 2);
    const double t = s - static_cast<double>(j);
    counts[j] += 1.0 - t;
    counts[j + 1] += t;
  }

  const auto taps = static_cast<std::ptrdiff_t>(std::ceil(6.0 * h / d));
  std::vector<std::array<double, 4>> kernel(2 * taps + 1);
  for (std::ptrdiff_t k = -taps; k <= taps; ++k)
    kernel[k + taps] = kernel_derivatives(static_cast<double>(k) * d / h, h);

  const auto sn = static_cast<std::ptrdiff_t>(nodes);
  std::vector<std::array<double, 4>> rho(nodes, {0.0, 0.0, 0.0, 0.0});
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::ptrdiff_t j = 0; j < sn; ++j) {
    std::array<double, 4> acc{};
    const std::ptrdiff_t k0 = std::max(-taps, j - (sn - 1));
    const std::ptrdiff_t k1 = std::min(taps, j);
    for (std::ptrdiff_t k = k0; k <= k1; ++k) {
      const double c = counts[j - k];
      if (c == 0.0) continue;
      const auto& kk = kernel[k + taps];
      for (int m = 0; m < 4; ++m) acc[m] += c * kk[m];
    }
    for (int m = 0; m < 4; ++m) rho[j][m] = acc[m] * inv_n;
  }

  double rho_max = 0.0;
  for (const auto& r : rho) rho_max = std::max(rho_max, r[0]);
  std::vector<std::uint8_t> mask(nodes);
  for (std::size_t j = 0; j < nodes; ++j) mask[j] = rho[j][0] > kKdeFloor * rho_max;

  const double c = params.hbar() * params.hbar() / (4.0 * params.mass());
  std::vector<double> grid_force(nodes, 0.0);
  for (std::size_t j = 0; j < nodes; ++j)
    if (mask[j]) grid_force[j] = force_from_derivatives(rho[j], c);
  flat_extrapolate(grid_force, mask, false);

  MeanFieldForce out;
  out.bandwidth = h;
  out.force.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = (ens.x[i] - lo) / d;
    const auto j = std::min(static_cast<std::size_t>(s), nodes - 2);
    const double t = s - static_cast<double>(j);
    out.force[i] = (1.0 - t) * grid_force[j] + t * grid_force[j + 1];
    if (!mask[j] || !mask[j + 1]) ++out.extrapolated;
  }
  return out;
}

void advance_ensemble(TrajectoryEnsemble& ens, const PhysicalParams& params,
                      const ForceModel& model, double dt) {
  validate_dt(dt);
  const double m = params.mass();
  const double b = params.friction();
  if (model.thermal && !(b > 0.0)) throw InvalidArgument("thermal force requires b > 0");
  if (model.thermal && !(params.kT() >= 0.0)) throw InvalidArgument("thermal force requires kT >= 0");
  const std::size_t n = ens.size();
  if (ens.v.size() != n || ens.stream.size() != n)
    throw InvalidArgument("ensemble arrays differ in length");

  std::vector<double> quantum;
  if (model.quantum == QuantumForceMode::meanfield) {
    auto mf = meanfield_quantum_force(ens, params, model.bandwidth);
    ens.diagnostics.kde_extrapolated += mf.extrapolated;
    const auto qm = sample_moments(mf.force);
    ens.diagnostics.quantum_force_mean = qm.mean;
    ens.diagnostics.quantum_force_stderr = std::sqrt(qm.variance / static_cast<double>(n));
    quantum = std::move(mf.force);
  }

  const double kick = model.thermal ? std::sqrt(2.0 * b * params.kT() * dt) / m : 0.0;
  const std::uint64_t draw = ens.steps + 1;
  const PotentialSpec slope = model.potential.differentiated(1);
  for (std::size_t i = 0; i < n; ++i) {
    double force = -slope.value(ens.x[i]);
    if (!quantum.empty()) force += quantum[i];
    double v = ens.v[i] + dt * (force - b * ens.v[i]) / m;
    if (kick > 0.0) v += kick * philox_normals(ens.seed, ens.stream[i], draw)[0];
    ens.v[i] = v;
    ens.x[i] += dt * v;
  }
  ens.steps += 1;
  ens.time += dt;
}

TrajectoryEnsemble step_ensemble(const TrajectoryEnsemble& ens, const PhysicalParams& params,
                                 const ForceModel& model, double dt) {
  TrajectoryEnsemble out = ens;
  advance_ensemble(out, params, model, dt);
  return out;
}

double variance_standard_error(const std::vector<double>& values) {
  const auto sm = sample_moments(values);
  double m4 = 0.0;
  for (double v : values) {
    const double d = v - sm.mean;
    m4 += d * d * d * d;
  }
  const double n = static_cast<double>(values.size());
  m4 /= n;
  return std::sqrt(std::max(0.0, m4 - sm.variance * sm.variance) / n);
}

EnsembleStatistics ensemble_statistics(const TrajectoryEnsemble& ens, const PhysicalParams& params,
                                       const std::optional<PhaseSpaceGrid>& grid,
                                       std::size_t velocity_bins) {
  const std::size_t n = ens.size();
  if (n < 100) throw InvalidArgument("statistics need N >= 100");
  if (velocity_bins == 0) throw InvalidArgument("velocity_bins must be positive");
  const auto mx = sample_moments(ens.x);
  const auto mv = sample_moments(ens.v);
  EnsembleStatistics st{n, mx.mean, mx.variance, mv.mean, mv.variance, {}, std::nullopt, 0};

  const auto [lo_it, hi_it] = std::minmax_element(ens.x.begin(), ens.x.end());
  const double lo = *lo_it;
  const double width = (*hi_it - lo) / static_cast<double>(velocity_bins);
  std::vector<double> sum(velocity_bins, 0.0);
  std::vector<std::size_t> count(velocity_bins, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = 0;
    if (width > 0.0)
      k = std::min(static_cast<std::size_t>((ens.x[i] - lo) / width), velocity_bins - 1);
    sum[k] += ens.v[i];
    ++count[k];
  }
  st.velocity_field.reserve(velocity_bins);
  for (std::size_t k = 0; k < velocity_bins; ++k) {
    const double center = lo + (static_cast<double>(k) + 0.5) * width;
    const double v = count[k] > 0 ? sum[k] / static_cast<double>(count[k]) : std::nan("");
    st.velocity_field.push_back({center, v, count[k], count[k] < 10});
  }

  if (grid) {
    const auto& g = *grid;
    const double dx = g.x_grid().dx();
    const double dp = g.dp();
    const double length = g.x_grid().length();
    const auto nx = static_cast<std::ptrdiff_t>(g.nx());
    std::vector<double> hist(g.size(), 0.0);
    std::size_t inside = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = params.mass() * ens.v[i];
      const double sj = std::floor((p + g.p_max()) / dp + 0.5);
      if (sj < 0.0 || sj >= static_cast<double>(g.np())) {
        ++st.outside;
        continue;
      }
      double xr = std::fmod(ens.x[i] - g.x_grid().x_min(), length);
      if (xr < 0.0) xr += length;
      auto ix = static_cast<std::ptrdiff_t>(std::floor(xr / dx + 0.5)) % nx;
      hist[g.index(static_cast<std::size_t>(ix), static_cast<std::size_t>(sj))] += 1.0;
      ++inside;
    }
    if (inside == 0) throw NumericalError("no particle inside the histogram grid");
    const double scale = 1.0 / (static_cast<double>(inside) * dx * dp);
    for (double& h : hist) h *= scale;
    st.histogram.emplace(g, std::move(hist), ens.time);
  }
  return st;
}

void write_ensemble_csv(std::ostream& out, const TrajectoryEnsemble& ens) {
  csv::header(out, {"id", "x", "v"});
  for (std::size_t i = 0; i < ens.size(); ++i)
    csv::row(out, {static_cast<double>(ens.stream[i]), ens.x[i], ens.v[i]});
  if (!out) throw IoError("failed to write ensemble CSV");
}

}  // namespace dqm
