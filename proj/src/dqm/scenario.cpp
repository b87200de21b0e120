#include "dqm/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <unistd.h>

#include "json.hpp"

#include "dqm/csv.hpp"
#include "dqm/diffusion.hpp"
#include "dqm/error.hpp"
#include "dqm/kostin.hpp"
#include "dqm/oracle.hpp"

namespace dqm {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string where(const std::string& key, int line) {
  if (line > 0) return "line " + std::to_string(line) + ": key '" + key + "'";
  return "key '" + key + (line < 0 ? "' (override)" : "' (default)");
}

[[noreturn]] void fail(const std::string& key, int line, const std::string& what) {
  throw ConfigError(where(key, line) + ": " + what);
}

double parse_number(const std::string& key, int line, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out))
    fail(key, line, "expected a finite number, got '" + v + "'");
  return out;
}

std::uint64_t parse_unsigned(const std::string& key, int line, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end)
    fail(key, line, "expected a non-negative integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, int line, const std::string& v) {
  if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
  if (v == "off" || v == "false" || v == "no" || v == "0") return false;
  fail(key, line, "expected on|off, got '" + v + "'");
}

template <typename E>
E parse_enum(const std::string& key, int line, const std::string& v,
             std::initializer_list<std::pair<const char*, E>> names) {
  std::string allowed;
  for (const auto& [name, value] : names) {
    if (v == name) return value;
    allowed += allowed.empty() ? name : std::string("|") + name;
  }
  fail(key, line, "expected " + allowed + ", got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, int line, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(key, line, trim(item)));
  if (out.empty()) fail(key, line, "expected a comma-separated list of numbers");
  return out;
}

const char* solver_name(SolverKind k) {
  switch (k) {
    case SolverKind::kostin: return "kostin";
    case SolverKind::smoluchowski: return "smoluchowski";
    case SolverKind::nonlinear_smoluchowski: return "nonlinear_smoluchowski";
    case SolverKind::phasespace: return "phasespace";
    case SolverKind::langevin: return "langevin";
    case SolverKind::oracle: return "oracle";
  }
  return "";
}

const char* initial_name(InitialKind k) {
  switch (k) {
    case InitialKind::gaussian: return "gaussian";
    case InitialKind::ground_state: return "ground_state";
    case InitialKind::maxwell_boltzmann: return "maxwell_boltzmann";
  }
  return "";
}

const char* x_model_name(XModelKind k) {
  switch (k) {
    case XModelKind::none: return "none";
    case XModelKind::coffey: return "coffey";
    case XModelKind::gaussian_nonlinear: return "gaussian_nonlinear";
  }
  return "";
}

const std::vector<std::string>& oracle_names() {
  static const std::vector<std::string> names{
      "gaussian_variance", "harmonic_dispersion", "free_quantum", "einstein",
      "thermal_free",      "damped_mean",         "commutator",   "maxwell_boltzmann",
      "ground_state"};
  return names;
}

using Setter = std::function<void(Scenario&, int, const std::string&)>;

struct KeySpec {
  const char* name;
  Setter set;
  std::function<std::string(const Scenario&)> show;
};

std::string num(double v) { return csv::number(v); }

std::string list_text(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + num(v[i]);
  return out;
}

const std::vector<KeySpec>& key_table() {
  using S = Scenario;
  using str = const std::string&;
  static const std::vector<KeySpec> table{
      {"solver",
       [](S& s, int l, str v) {
         s.solver = parse_enum<SolverKind>("solver", l, v,
                                           {{"kostin", SolverKind::kostin},
                                            {"smoluchowski", SolverKind::smoluchowski},
                                            {"nonlinear_smoluchowski",
                                             SolverKind::nonlinear_smoluchowski},
                                            {"phasespace", SolverKind::phasespace},
                                            {"langevin", SolverKind::langevin},
                                            {"oracle", SolverKind::oracle}});
       },
       [](const S& s) { return std::string(solver_name(s.solver)); }},
      {"m", [](S& s, int l, str v) { s.m = parse_number("m", l, v); },
       [](const S& s) { return num(s.m); }},
      {"b", [](S& s, int l, str v) { s.b = parse_number("b", l, v); },
       [](const S& s) { return num(s.b); }},
      {"kT", [](S& s, int l, str v) { s.kT = parse_number("kT", l, v); },
       [](const S& s) { return num(s.kT); }},
      {"hbar", [](S& s, int l, str v) { s.hbar = parse_number("hbar", l, v); },
       [](const S& s) { return num(s.hbar); }},
      {"potential", [](S& s, int l, str v) { s.potential = parse_list("potential", l, v); },
       [](const S& s) { return list_text(s.potential); }},
      {"x_min", [](S& s, int l, str v) { s.x_min = parse_number("x_min", l, v); },
       [](const S& s) { return num(s.x_min); }},
      {"x_max", [](S& s, int l, str v) { s.x_max = parse_number("x_max", l, v); },
       [](const S& s) { return num(s.x_max); }},
      {"n", [](S& s, int l, str v) { s.n = parse_unsigned("n", l, v); },
       [](const S& s) { return std::to_string(s.n); }},
      {"p_max", [](S& s, int l, str v) { s.p_max = parse_number("p_max", l, v); },
       [](const S& s) { return num(s.p_max); }},
      {"n_p", [](S& s, int l, str v) { s.n_p = parse_unsigned("n_p", l, v); },
       [](const S& s) { return std::to_string(s.n_p); }},
      {"initial",
       [](S& s, int l, str v) {
         s.initial = parse_enum<InitialKind>(
             "initial", l, v,
             {{"gaussian", InitialKind::gaussian},
              {"ground_state", InitialKind::ground_state},
              {"maxwell_boltzmann", InitialKind::maxwell_boltzmann}});
       },
       [](const S& s) { return std::string(initial_name(s.initial)); }},
      {"x0", [](S& s, int l, str v) { s.x0 = parse_number("x0", l, v); },
       [](const S& s) { return num(s.x0); }},
      {"sigma2", [](S& s, int l, str v) { s.sigma2 = parse_number("sigma2", l, v); },
       [](const S& s) { return num(s.sigma2); }},
      {"v0", [](S& s, int l, str v) { s.v0 = parse_number("v0", l, v); },
       [](const S& s) { return num(s.v0); }},
      {"sigma2_v",
       [](S& s, int l, str v) {
         s.sigma2_v = v == "auto" ? -1.0 : parse_number("sigma2_v", l, v);
       },
       [](const S& s) { return s.sigma2_v < 0.0 ? std::string("auto") : num(s.sigma2_v); }},
      {"dt", [](S& s, int l, str v) { s.dt = v == "auto" ? 0.0 : parse_number("dt", l, v); },
       [](const S& s) { return s.dt == 0.0 ? std::string("auto") : num(s.dt); }},
      {"t_max", [](S& s, int l, str v) { s.t_max = parse_number("t_max", l, v); },
       [](const S& s) { return num(s.t_max); }},
      {"cadence",
       [](S& s, int l, str v) { s.cadence = v == "auto" ? 0.0 : parse_number("cadence", l, v); },
       [](const S& s) { return s.cadence == 0.0 ? std::string("auto") : num(s.cadence); }},
      {"seed", [](S& s, int l, str v) { s.seed = parse_unsigned("seed", l, v); },
       [](const S& s) { return std::to_string(s.seed); }},
      {"particles", [](S& s, int l, str v) { s.particles = parse_unsigned("particles", l, v); },
       [](const S& s) { return std::to_string(s.particles); }},
      {"quantum", [](S& s, int l, str v) { s.quantum = parse_bool("quantum", l, v); },
       [](const S& s) { return std::string(s.quantum ? "on" : "off"); }},
      {"friction", [](S& s, int l, str v) { s.friction = parse_bool("friction", l, v); },
       [](const S& s) { return std::string(s.friction ? "on" : "off"); }},
      {"x_model",
       [](S& s, int l, str v) {
         s.x_model = parse_enum<XModelKind>(
             "x_model", l, v,
             {{"none", XModelKind::none},
              {"coffey", XModelKind::coffey},
              {"gaussian_nonlinear", XModelKind::gaussian_nonlinear}});
       },
       [](const S& s) { return std::string(x_model_name(s.x_model)); }},
      {"thermal", [](S& s, int l, str v) { s.thermal = parse_bool("thermal", l, v); },
       [](const S& s) { return std::string(s.thermal ? "on" : "off"); }},
      {"quantum_force",
       [](S& s, int l, str v) {
         s.quantum_force = parse_enum<QuantumForceMode>(
             "quantum_force", l, v,
             {{"none", QuantumForceMode::none}, {"meanfield", QuantumForceMode::meanfield}});
       },
       [](const S& s) {
         return std::string(s.quantum_force == QuantumForceMode::none ? "none" : "meanfield");
       }},
      {"bandwidth",
       [](S& s, int l, str v) {
         if (v == "silverman") {
           s.bandwidth = Bandwidth::silverman();
           return;
         }
         const double h = parse_number("bandwidth", l, v);
         if (!(h > 0.0)) fail("bandwidth", l, "must be silverman or a positive number");
         s.bandwidth = Bandwidth::fixed(h);
       },
       [](const S& s) {
         return s.bandwidth.rule == Bandwidth::Rule::silverman ? std::string("silverman")
                                                               : num(s.bandwidth.value);
       }},
      {"beta_nodes",
       [](S& s, int l, str v) { s.beta_nodes = static_cast<int>(parse_unsigned("beta_nodes", l, v)); },
       [](const S& s) { return std::to_string(s.beta_nodes); }},
      {"stability_c",
       [](S& s, int l, str v) { s.stability_c = parse_number("stability_c", l, v); },
       [](const S& s) { return num(s.stability_c); }},
      {"oracle",
       [](S& s, int l, str v) {
         const auto& names = oracle_names();
         if (std::find(names.begin(), names.end(), v) == names.end())
           fail("oracle", l, "unknown oracle '" + v + "'");
         s.oracle = v;
       },
       [](const S& s) { return s.oracle; }},
      {"snapshots", [](S& s, int l, str v) { s.snapshots = parse_bool("snapshots", l, v); },
       [](const S& s) { return std::string(s.snapshots ? "on" : "off"); }},
      {"output",
       [](S& s, int l, str v) {
         if (v.empty()) fail("output", l, "must not be empty");
         s.output = v;
       },
       [](const S& s) { return s.output; }},
  };
  return table;
}

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : key_table())
    if (name == k.name) return &k;
  return nullptr;
}

int line_of(const Scenario& s, const std::string& key) {
  auto it = s.lines.find(key);
  return it == s.lines.end() ? 0 : it->second;
}

[[noreturn]] void violate(const Scenario& s, const std::string& key, const std::string& what) {
  fail(key, line_of(s, key), what);
}

double harmonic_omega(const Scenario& s) {
  return s.potential_spec().harmonic_frequency(s.m);
}

void validate(const Scenario& s) {
  if (!(s.m > 0.0)) violate(s, "m", "mass must be > 0");
  if (s.b < 0.0) violate(s, "b", "friction must be >= 0");
  if (s.kT < 0.0) violate(s, "kT", "kT must be >= 0");
  if (s.hbar < 0.0) violate(s, "hbar", "hbar must be >= 0");
  if (!(s.x_max > s.x_min)) violate(s, "x_max", "x_max must exceed x_min");
  if (s.n < 8) violate(s, "n", "grid needs at least 8 nodes");
  if (!(s.t_max > 0.0)) violate(s, "t_max", "t_max must be > 0");
  if (s.dt < 0.0) violate(s, "dt", "dt must be > 0 or auto");
  if (s.cadence < 0.0) violate(s, "cadence", "cadence must be > 0 or auto");
  if (!(s.sigma2 > 0.0)) violate(s, "sigma2", "initial variance must be > 0");
  if (!(s.stability_c > 0.0)) violate(s, "stability_c", "must be > 0");

  const bool quadratic = s.potential_spec().is_quadratic_or_less();
  const double omega = quadratic ? harmonic_omega(s) : 0.0;
  if (s.initial == InitialKind::ground_state) {
    if (!quadratic || !(omega > 0.0))
      violate(s, "initial", "ground_state needs a harmonic potential with omega0 > 0");
    if (!(s.hbar > 0.0)) violate(s, "initial", "ground_state needs hbar > 0");
  }
  if (s.initial == InitialKind::maxwell_boltzmann) {
    if (!quadratic || !(omega > 0.0))
      violate(s, "initial", "maxwell_boltzmann needs a harmonic potential with omega0 > 0");
    if (!(s.kT > 0.0)) violate(s, "initial", "maxwell_boltzmann needs kT > 0");
  }

  switch (s.solver) {
    case SolverKind::smoluchowski:
    case SolverKind::nonlinear_smoluchowski:
      if (!(s.b > 0.0)) violate(s, "b", "the overdamped solver requires b > 0");
      if (s.solver == SolverKind::nonlinear_smoluchowski) {
        if (s.beta_nodes < 1) violate(s, "beta_nodes", "must be >= 1");
        if (s.beta_nodes >= 2 && !(s.kT > 0.0))
          violate(s, "kT", "the nonlinear quadrature needs kT > 0");
        if (s.beta_nodes >= 2 && !(quadratic && omega > 0.0))
          violate(s, "potential", "the nonlinear quadrature needs a harmonic potential");
      }
      break;
    case SolverKind::kostin:
      if (!(s.hbar > 0.0)) violate(s, "hbar", "the wave-function solver requires hbar > 0");
      if (s.initial == InitialKind::maxwell_boltzmann)
        violate(s, "initial", "a thermal mixture has no wave function");
      break;
    case SolverKind::phasespace:
      if (s.n_p < 8 || s.n_p % 2 != 0) violate(s, "n_p", "must be even and >= 8");
      if (!(s.p_max > 0.0)) violate(s, "p_max", "must be > 0");
      if (s.initial == InitialKind::gaussian && s.sigma2_v < 0.0 && !(s.hbar > 0.0))
        violate(s, "sigma2_v", "a classical Gaussian needs an explicit velocity variance");
      break;
    case SolverKind::langevin:
      if (s.particles < 100) violate(s, "particles", "ensembles need N >= 100");
      if (s.thermal && !(s.b > 0.0)) violate(s, "thermal", "the thermal force requires b > 0");
      if (s.quantum_force == QuantumForceMode::meanfield && s.particles < 1000)
        violate(s, "quantum_force", "the mean-field force needs N >= 1000");
      if (s.initial == InitialKind::gaussian && s.sigma2_v < 0.0 && !(s.hbar > 0.0))
        violate(s, "sigma2_v", "a classical Gaussian needs an explicit velocity variance");
      if (s.n_p < 8 || s.n_p % 2 != 0) violate(s, "n_p", "must be even and >= 8");
      if (!(s.p_max > 0.0)) violate(s, "p_max", "must be > 0");
      break;
    case SolverKind::oracle:
      break;
  }
  if (s.x_model == XModelKind::coffey && !(s.kT > 0.0))
    violate(s, "x_model", "the Coffey model requires kT > 0");
  if (s.x_model != XModelKind::none && s.solver != SolverKind::phasespace)
    violate(s, "x_model", "x_model applies to the phasespace solver only");
}

double initial_variance(const Scenario& s) {
  switch (s.initial) {
    case InitialKind::gaussian: return s.sigma2;
    case InitialKind::ground_state: return s.hbar / (2.0 * s.m * harmonic_omega(s));
    case InitialKind::maxwell_boltzmann: {
      const double w = harmonic_omega(s);
      return s.kT / (s.m * w * w);
    }
  }
  return s.sigma2;
}

double initial_velocity_variance(const Scenario& s) {
  if (s.initial == InitialKind::maxwell_boltzmann) return s.kT / s.m;
  if (s.initial == InitialKind::gaussian && s.sigma2_v >= 0.0) return s.sigma2_v;
  return s.hbar * s.hbar / (4.0 * s.m * s.m * initial_variance(s));
}

Grid1D scenario_grid(const Scenario& s) {
  return build_grid(s.x_min, s.x_max, s.n, Boundary::periodic);
}

PhaseSpaceGrid scenario_phase_grid(const Scenario& s) {
  return {scenario_grid(s), s.n_p, s.p_max};
}

std::vector<double> record_times(const Scenario& s) {
  const double every = s.record_interval();
  std::vector<double> t{0.0};
  for (std::size_t k = 1;; ++k) {
    const double tk = static_cast<double>(k) * every;
    if (tk >= s.t_max * (1.0 - 1e-12)) break;
    t.push_back(tk);
  }
  t.push_back(s.t_max);
  return t;
}

// Equal steps no larger than dt_cap covering the interval.
std::pair<std::size_t, double> split_interval(double span, double dt_cap) {
  const auto steps =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / dt_cap * (1.0 - 1e-12))));
  return {steps, span / static_cast<double>(steps)};
}

double step_cap(const Scenario& s, double stable) {
  if (s.dt == 0.0) return stable;
  if (s.dt > stable * (1.0 + 1e-12))
    violate(s, "dt", "exceeds the stability bound " + num(stable));
  return s.dt;
}

std::vector<double> gaussian_row(const std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, ss / static_cast<double>(x.size() - 1)};
}

RunOutcome simulate_smoluchowski(const Scenario& s) {
  const auto grid = scenario_grid(s);
  const auto params = s.params();
  SmoluchowskiOptions options;
  options.stability_c = s.stability_c;
  options.beta_nodes = s.solver == SolverKind::nonlinear_smoluchowski ? s.beta_nodes : 0;
  SmoluchowskiSolver solver(gaussian_density(s.x0, initial_variance(s), grid), params,
                            s.potential_spec(), options);
  const double cap = step_cap(s, solver.max_dt());
  RunOutcome out;
  out.series.columns = {"t", "mean", "variance", "mass"};
  const auto times = record_times(s);
  double prev = 0.0;
  for (double t : times) {
    if (t > prev) {
      auto [steps, h] = split_interval(t - prev, cap);
      for (std::size_t k = 0; k < steps; ++k) solver.step(h);
      out.steps += steps;
      prev = t;
      solver.check_edges();
    }
    const auto mo = moments(solver.values(), grid);
    out.series.rows.push_back({t, mo.mean, mo.variance, integrate(solver.values(), grid)});
  }
  out.diagnostics["max_mass_drift"] = solver.worst().mass_drift;
  out.diagnostics["max_clip_mass"] = solver.worst().clip_mass;
  out.diagnostics["edge_ratio"] = edge_ratio(solver.values());
  out.diagnostics["dt"] = cap;
  if (s.snapshots) {
    std::ostringstream snap;
    csv::header(snap, {"x", "rho"});
    for (std::size_t i = 0; i < grid.size(); ++i) csv::row(snap, {grid.x(i), solver.values()[i]});
    out.diagnostics["snapshot_rows"] = static_cast<double>(grid.size());
    out.snapshot = snap.str();
  }
  return out;
}

RunOutcome simulate_kostin(const Scenario& s) {
  const auto grid = scenario_grid(s);
  const auto params = s.params();
  const auto pot = s.potential_spec();
  const double var = initial_variance(s);
  std::vector<cplx> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = grid.x(i);
    v[i] = std::exp(-(x - s.x0) * (x - s.x0) / (4.0 * var)) *
           std::polar(1.0, s.m * s.v0 * x / s.hbar);
  }
  const auto psi0 = normalize(grid, std::move(v)).field;
  KostinSolver solver(psi0, params, pot);
  const double cap = step_cap(s, kostin_max_dt(grid, params));
  RunOutcome out;
  out.series.columns = {"t", "norm", "mean", "variance", "momentum", "energy"};
  double prev = 0.0, drift = 0.0;
  for (double t : record_times(s)) {
    if (t > prev) {
      auto [steps, h] = split_interval(t - prev, cap);
      for (std::size_t k = 0; k < steps; ++k) solver.step(h);
      out.steps += steps;
      prev = t;
    }
    std::vector<cplx> raw(solver.values().begin(), solver.values().end());
    auto normalized = normalize(grid, std::move(raw));
    const auto ob = observe(normalized.field, params, pot);
    drift = std::max(drift, std::abs(normalized.norm - 1.0));
    out.series.rows.push_back({t, normalized.norm, ob.mean, ob.variance, ob.momentum, ob.energy});
  }
  out.diagnostics["max_norm_drift"] = drift;
  out.diagnostics["dt"] = cap;
  if (s.snapshots) {
    std::ostringstream snap;
    write_snapshot_csv(snap, solver.wave_function(), params);
    out.snapshot = snap.str();
  }
  return out;
}

WignerField initial_wigner(const Scenario& s, const PhaseSpaceGrid& g) {
  if (s.initial == InitialKind::maxwell_boltzmann)
    return maxwell_boltzmann_field(g, s.params(), s.potential_spec());
  const double vx = initial_variance(s);
  const double vp = s.m * s.m * initial_velocity_variance(s);
  const double p0 = s.m * s.v0;
  return sample_phase_density(g, [=](double x, double p) {
    return std::exp(-(x - s.x0) * (x - s.x0) / (2.0 * vx) - (p - p0) * (p - p0) / (2.0 * vp));
  });
}

RunOutcome simulate_phasespace(const Scenario& s) {
  const auto g = scenario_phase_grid(s);
  const auto params = s.params();
  PhaseSpaceSolver solver(initial_wigner(s, g), params, s.potential_spec(),
                          {s.quantum, s.friction, XModel{s.x_model}});
  const double cap = step_cap(s, solver.max_dt());
  RunOutcome out;
  out.series.columns = {"t", "mean_x", "var_x", "mean_p", "var_p", "total"};
  double prev = 0.0;
  for (double t : record_times(s)) {
    if (t > prev) {
      auto [steps, h] = split_interval(t - prev, cap);
      for (std::size_t k = 0; k < steps; ++k) solver.step(h);
      out.steps += steps;
      prev = t;
      solver.check_boundary();
    }
    const auto w = solver.field();
    const auto mg = marginals(w);
    const auto mx = moments(mg.x);
    double mp = 0.0, sp = 0.0;
    for (std::size_t j = 0; j < g.np(); ++j) mp += g.p(j) * mg.p[j] * g.dp();
    for (std::size_t j = 0; j < g.np(); ++j) sp += (g.p(j) - mp) * (g.p(j) - mp) * mg.p[j] * g.dp();
    out.series.rows.push_back({t, mx.mean, mx.variance, mp, sp, w.total()});
  }
  out.diagnostics["momentum_edge_ratio"] = solver.field().momentum_edge_ratio();
  out.diagnostics["dt"] = cap;
  if (s.snapshots) {
    std::ostringstream snap;
    write_wigner_csv(snap, solver.field());
    out.snapshot = snap.str();
  }
  return out;
}

RunOutcome simulate_langevin(const Scenario& s) {
  const auto params = s.params();
  GaussianPhaseSpec spec{s.x0, initial_variance(s), s.v0, initial_velocity_variance(s), 0.0};
  auto ens = sample_wigner_initial(spec, s.particles, s.seed);
  ForceModel model{s.thermal, s.quantum_force, s.bandwidth, s.potential_spec()};
  double stable = 0.01;
  if (s.potential_spec().is_quadratic_or_less()) {
    const double w = harmonic_omega(s);
    if (w > 0.0) stable = 0.01 / w;
  }
  const double cap = s.dt > 0.0 ? s.dt : stable;
  RunOutcome out;
  out.series.columns = {"t", "mean_x", "var_x", "mean_v", "var_v"};
  double prev = 0.0;
  for (double t : record_times(s)) {
    if (t > prev) {
      auto [steps, h] = split_interval(t - prev, cap);
      for (std::size_t k = 0; k < steps; ++k) advance_ensemble(ens, params, model, h);
      out.steps += steps;
      prev = t;
    }
    const auto rx = gaussian_row(ens.x);
    const auto rv = gaussian_row(ens.v);
    out.series.rows.push_back({t, rx[0], rx[1], rv[0], rv[1]});
  }
  auto st = ensemble_statistics(ens, params, scenario_phase_grid(s));
  out.histogram = std::move(st.histogram);
  out.diagnostics["histogram_outside"] = static_cast<double>(st.outside);
  out.diagnostics["kde_extrapolated"] = static_cast<double>(ens.diagnostics.kde_extrapolated);
  out.diagnostics["dt"] = cap;
  if (s.snapshots) {
    std::ostringstream snap;
    write_ensemble_csv(snap, ens);
    out.snapshot = snap.str();
  }
  return out;
}

RunOutcome simulate_oracle(const Scenario& s) {
  RunOutcome out;
  out.series.columns = {"t", "value"};
  for (double t : record_times(s)) out.series.rows.push_back({t, evaluate_oracle(s, s.oracle, t)});
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  f.close();
  if (!f) throw IoError("failed to write " + path.string());
}

std::string series_csv(const TimeSeries& ts) {
  std::ostringstream out;
  std::vector<std::string_view> names(ts.columns.begin(), ts.columns.end());
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (const auto& r : ts.rows) csv::row(out, r);
  return out.str();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Writes `fill(staging)` and moves the staging directory onto `dir`.
void commit_directory(const fs::path& dir, const std::function<void(const fs::path&)>& fill) {
  const fs::path parent = dir.has_parent_path() ? dir.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec || !fs::is_directory(parent))
    throw IoError("cannot create output parent " + parent.string());
  const fs::path staging =
      parent / ("." + dir.filename().string() + ".staging-" + std::to_string(::getpid()));
  fs::remove_all(staging, ec);
  if (!fs::create_directory(staging, ec) || ec)
    throw IoError("cannot create staging directory " + staging.string());
  try {
    fill(staging);
    if (fs::exists(dir)) fs::remove_all(dir);
    fs::rename(staging, dir);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(staging, ec);
    throw IoError(e.what());
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
}

void write_run(const Scenario& s, const RunOutcome& run, double wall, const fs::path& dir) {
  commit_directory(dir, [&](const fs::path& stage) {
    write_text(stage / "config.txt", s.source);
    const std::string resolved = resolved_config(s);
    write_text(stage / "resolved.txt", resolved);
    write_text(stage / "timeseries.csv", series_csv(run.series));
    if (!run.snapshot.empty()) write_text(stage / "snapshot.csv", run.snapshot);

    nlohmann::ordered_json j;
    j["solver"] = solver_name(s.solver);
    j["seed"] = s.seed;
    j["config_hash"] = hex64(fnv1a64(resolved));
    j["wall_time_s"] = wall;
    j["steps"] = run.steps;
    nlohmann::ordered_json fin;
    if (!run.series.rows.empty())
      for (std::size_t c = 0; c < run.series.columns.size(); ++c)
        fin[run.series.columns[c]] = run.series.rows.back()[c];
    j["final"] = fin;
    nlohmann::ordered_json diag = nlohmann::ordered_json::object();
    for (const auto& [k, v] : run.diagnostics) diag[k] = v;
    j["diagnostics"] = diag;
    write_text(stage / "summary.json", j.dump(2) + "\n");
  });
}

fs::path resolve_output(const Scenario& s, const fs::path& root) {
  const fs::path out(s.output);
  return out.is_absolute() ? out : root / out;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(f, line)) throw ConfigError(path.string() + ": empty CSV");
  t.header = split_csv_line(line);
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw ConfigError(path.string() + ": line " + std::to_string(lineno) + ": column count");
    std::vector<double> row;
    for (const auto& c : cells) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || ptr != c.data() + c.size())
        throw ConfigError(path.string() + ": line " + std::to_string(lineno) +
                          ": not a number '" + c + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

std::vector<double> TimeSeries::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw InvalidArgument("no column '" + name + "'");
  const auto c = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

Scenario parse_config(const std::string& text, const std::map<std::string, std::string>& overrides) {
  Scenario s;
  s.source = text;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (s.lines.count(key))
      throw ConfigError(where(key, lineno) + ": duplicate (first defined on line " +
                        std::to_string(s.lines[key]) + ")");
    if (value.empty()) fail(key, lineno, "missing value");
    spec->set(s, lineno, value);
    s.lines[key] = lineno;
  }
  for (const auto& [key, value] : overrides) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError("override: unknown key '" + key + "'");
    spec->set(s, -1, value);
    s.lines[key] = -1;
  }
  validate(s);
  return s;
}

std::string resolved_config(const Scenario& s) {
  std::string out;
  for (const auto& k : key_table()) out += std::string(k.name) + " = " + k.show(s) + "\n";
  return out;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

RunOutcome simulate(const Scenario& s) {
  switch (s.solver) {
    case SolverKind::smoluchowski:
    case SolverKind::nonlinear_smoluchowski: return simulate_smoluchowski(s);
    case SolverKind::kostin: return simulate_kostin(s);
    case SolverKind::phasespace: return simulate_phasespace(s);
    case SolverKind::langevin: return simulate_langevin(s);
    case SolverKind::oracle: return simulate_oracle(s);
  }
  throw InvalidArgument("unknown solver");
}

fs::path output_root() {
  const char* env = std::getenv("DQM_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::current_path();
}

fs::path run_scenario(const Scenario& s, const fs::path& root) {
  const auto start = std::chrono::steady_clock::now();
  const auto run = simulate(s);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const fs::path dir = resolve_output(s, root);
  write_run(s, run, wall, dir);
  return dir;
}

double evaluate_oracle(const Scenario& s, const std::string& name, double t) {
  const auto params = s.params();
  const auto pot = s.potential_spec();
  if (name == "gaussian_variance")
    return oracle::gaussian_variance_curve(params, pot, initial_variance(s))(t);
  if (name == "harmonic_dispersion") return dispersion_harmonic(t, params, harmonic_omega(s));
  if (name == "free_quantum") return oracle::free_quantum_dispersion(t, params);
  if (name == "einstein") return initial_variance(s) + oracle::einstein_dispersion(t, params);
  if (name == "thermal_free") return dispersion_free_implicit(t, params);
  if (name == "damped_mean")
    return oracle::damped_oscillator_mean(params, harmonic_omega(s), s.x0, s.v0)(t);
  if (name == "commutator") return oracle::commutator_factor(params, pot, t);
  if (name == "maxwell_boltzmann") {
    const double w = harmonic_omega(s);
    if (!(w > 0.0) || !(s.kT > 0.0))
      throw InvalidArgument("maxwell_boltzmann needs a harmonic potential and kT > 0");
    return s.kT / (s.m * w * w);
  }
  if (name == "ground_state") {
    const double w = harmonic_omega(s);
    if (!(w > 0.0)) throw InvalidArgument("ground_state needs a harmonic potential");
    return s.hbar / (2.0 * s.m * w);
  }
  throw ConfigError("unknown oracle '" + name + "'");
}

double oracle_error(const Scenario& s, const RunOutcome& run, const std::string& name) {
  if (name == "maxwell_boltzmann" && s.solver == SolverKind::langevin) {
    if (!run.histogram) throw InvalidArgument("run has no phase-space histogram");
    const auto& h = *run.histogram;
    const auto mb = maxwell_boltzmann_field(h.grid(), s.params(), s.potential_spec());
    double l1 = 0.0;
    for (std::size_t k = 0; k < h.grid().size(); ++k)
      l1 += std::abs(h.values()[k] - mb.values()[k]);
    return l1 * h.grid().x_grid().dx() * h.grid().dp();
  }
  if (name == "commutator") throw ConfigError("oracle 'commutator' has no run observable");
  const bool mean = name == "damped_mean";
  std::string column;
  static const std::vector<std::string> mean_columns{"mean", "mean_x"};
  static const std::vector<std::string> variance_columns{"variance", "var_x", "value"};
  for (const auto& c : mean ? mean_columns : variance_columns)
    if (std::find(run.series.columns.begin(), run.series.columns.end(), c) !=
        run.series.columns.end()) {
      column = c;
      break;
    }
  if (column.empty()) throw ConfigError("run has no column matching oracle '" + name + "'");
  const auto t = run.series.column("t");
  const auto obs = run.series.column(column);
  double worst = 0.0, scale = 0.0;
  std::vector<double> ref(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    ref[i] = evaluate_oracle(s, name, t[i]);
    scale = std::max(scale, std::abs(ref[i]));
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] <= 0.0) continue;
    const double denom = mean ? scale : std::abs(ref[i]);
    worst = std::max(worst, std::abs(obs[i] - ref[i]) / denom);
  }
  return worst;
}

SweepReport run_sweep(const Scenario& base, const std::string& axis,
                      const std::vector<std::string>& values, const std::string& oracle) {
  SweepReport r;
  r.axis = axis;
  r.oracle = oracle;
  r.values = values;
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const auto& names = oracle_names();
  if (std::find(names.begin(), names.end(), oracle) == names.end())
    throw ConfigError("unknown oracle '" + oracle + "'");
  if (!find_key(axis)) throw ConfigError("sweep axis: unknown key '" + axis + "'");
  std::vector<double> xs, ys;
  r.resolution_axis = axis == "n" || axis == "n_p" || axis == "dt";
  bool fit = true;
  for (const auto& v : values) {
    const double numeric = parse_number(axis, 0, v);
    const Scenario member = parse_config(base.source, {{axis, v}});
    const auto run = simulate(member);
    const double err = oracle_error(member, run, oracle);
    r.errors.push_back(err);
    if (!(numeric > 0.0) || !(err > 0.0)) fit = false;
    const double resolution = (axis == "n" || axis == "n_p") ? 1.0 / numeric : numeric;
    xs.push_back(std::log(r.resolution_axis ? resolution : numeric));
    ys.push_back(std::log(err));
  }
  r.slope = fit && values.size() >= 2 ? least_squares_slope(xs, ys) : std::nan("");
  return r;
}

SweepReport run_sweep_to_disk(const Scenario& base, const std::string& axis,
                              const std::vector<std::string>& values, const std::string& oracle,
                              const fs::path& root) {
  const auto report = run_sweep(base, axis, values, oracle);
  const fs::path dir = resolve_output(base, root);
  commit_directory(dir, [&](const fs::path& stage) {
    write_text(stage / "config.txt", base.source);
    std::ostringstream table;
    csv::header(table, {"index", "value", "error"});
    for (std::size_t i = 0; i < values.size(); ++i)
      csv::row(table, {static_cast<double>(i), parse_number(axis, 0, values[i]), report.errors[i]});
    write_text(stage / "sweep.csv", table.str());
    nlohmann::ordered_json j;
    j["axis"] = axis;
    j["oracle"] = oracle;
    j["values"] = values;
    j["errors"] = report.errors;
    j["resolution_axis"] = report.resolution_axis;
    if (std::isfinite(report.slope))
      j[report.resolution_axis ? "order" : "slope"] = report.slope;
    else
      j[report.resolution_axis ? "order" : "slope"] = nullptr;
    j["config_hash"] = hex64(fnv1a64(resolved_config(base)));
    write_text(stage / "sweep.json", j.dump(2) + "\n");
  });
  return report;
}

double compare_csv(const fs::path& a, const fs::path& b, CompareMetric metric) {
  const auto ta = read_csv(a);
  const auto tb = read_csv(b);
  if (ta.header != tb.header) throw ConfigError("compare: headers differ");
  if (ta.rows.size() != tb.rows.size()) throw ConfigError("compare: row counts differ");
  if (ta.header.size() < 2) throw ConfigError("compare: need at least two columns");
  double sum = 0.0, worst = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < ta.rows.size(); ++r)
    for (std::size_t c = 1; c < ta.header.size(); ++c) {
      const double d = std::abs(ta.rows[r][c] - tb.rows[r][c]);
      sum += d;
      worst = std::max(worst, d);
      ++count;
    }
  if (metric == CompareMetric::linf) return worst;
  return count ? sum / static_cast<double>(count) : 0.0;
}

int exit_code(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->category()) {
      case Error::Category::config:
      case Error::Category::invalid_argument: return 2;
      case Error::Category::numerical: return 3;
      case Error::Category::io: return 4;
    }
  }
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return 4;
  return 3;
}

std::string error_record(const std::exception& e) {
  static const char* names[] = {"", "", "config", "numerical", "io"};
  nlohmann::ordered_json j;
  j["error"] = names[exit_code(e)];
  j["exit_code"] = exit_code(e);
  j["message"] = e.what();
  return j.dump();
}

}  // namespace dqm
