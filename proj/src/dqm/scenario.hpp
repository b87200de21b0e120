#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dqm/core.hpp"
#include "dqm/langevin.hpp"
#include "dqm/phasespace.hpp"

namespace dqm {

enum class SolverKind { kostin, smoluchowski, nonlinear_smoluchowski, phasespace, langevin, oracle };
enum class InitialKind { gaussian, ground_state, maxwell_boltzmann };

/// Fully validated run description. Every field has a documented default.
struct Scenario {
  SolverKind solver = SolverKind::kostin;
  double m = 1.0;
  double b = 0.0;
  double kT = 0.0;
  double hbar = 1.0;
  std::vector<double> potential{0.0, 0.0, 0.5};

  double x_min = -10.0;
  double x_max = 10.0;
  std::size_t n = 256;
  double p_max = 8.0;
  std::size_t n_p = 64;

  InitialKind initial = InitialKind::gaussian;
  double x0 = 0.0;
  double sigma2 = 0.5;
  double v0 = 0.0;
  double sigma2_v = -1.0;  // negative: minimal uncertainty hbar^2 / (4 m^2 sigma2)

  double dt = 0.0;  // 0: largest stable step (auto)
  double t_max = 1.0;
  double cadence = 0.0;  // 0: t_max / 20

  std::uint64_t seed = 1;
  std::size_t particles = 10000;

  bool quantum = true;
  bool friction = true;
  XModelKind x_model = XModelKind::none;
  bool thermal = false;
  QuantumForceMode quantum_force = QuantumForceMode::none;
  Bandwidth bandwidth{};
  int beta_nodes = 5;
  double stability_c = 0.1;
  std::string oracle = "gaussian_variance";
  bool snapshots = false;
  std::string output = "out";

  std::string source;                      // verbatim config text
  std::map<std::string, int> lines;        // key -> line of definition

  PhysicalParams params() const { return {m, b, kT, hbar}; }
  PotentialSpec potential_spec() const { return PotentialSpec(potential); }
  double record_interval() const { return cadence > 0.0 ? cadence : t_max / 20.0; }
};

/// Parses `key = value` lines with `#` comments. `overrides` replace (or add)
/// keys after parsing and are validated the same way. Throws ConfigError
/// naming the key and line.
Scenario parse_config(const std::string& text,
                      const std::map<std::string, std::string>& overrides = {});

/// Canonical `key = value` listing of every key, defaults included.
std::string resolved_config(const Scenario& s);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& text);

struct TimeSeries {
  std::vector<std::string> columns;  // first column is t
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& name) const;
};

struct RunOutcome {
  TimeSeries series;
  std::map<std::string, double> diagnostics;
  std::optional<WignerField> histogram;  // langevin runs on the phase-space grid
  std::string snapshot;                  // final-state CSV when snapshots are on
  std::size_t steps = 0;
};

/// Runs the scenario in memory.
RunOutcome simulate(const Scenario& s);

/// Output root: DQM_OUTPUT_ROOT when set, else the current directory.
std::filesystem::path output_root();

/// Runs and writes config.txt, resolved.txt, timeseries.csv, summary.json (and
/// snapshot files) into root / s.output. Files are staged and moved into place
/// only on success. Returns the output directory.
std::filesystem::path run_scenario(const Scenario& s, const std::filesystem::path& root);

/// Value of a named oracle curve for the scenario's parameters at time t.
double evaluate_oracle(const Scenario& s, const std::string& name, double t);

struct SweepReport {
  std::string axis;
  std::string oracle;
  std::vector<std::string> values;
  std::vector<double> errors;
  /// Least-squares slope of log(error) against log(resolution) for n, n_p, dt
  /// (positive = convergence order) or against log(value) for other axes.
  double slope = 0.0;
  bool resolution_axis = false;
};

/// Error of one run against an oracle label: maximum relative deviation of the
/// matching observable over the records with t > 0 (histogram L1 distance
/// for maxwell_boltzmann).
double oracle_error(const Scenario& s, const RunOutcome& run, const std::string& oracle);

SweepReport run_sweep(const Scenario& base, const std::string& axis,
                      const std::vector<std::string>& values, const std::string& oracle);

/// Runs the sweep and writes config.txt, sweep.csv and sweep.json into
/// root / base.output.
SweepReport run_sweep_to_disk(const Scenario& base, const std::string& axis,
                              const std::vector<std::string>& values, const std::string& oracle,
                              const std::filesystem::path& root);

enum class CompareMetric { l1, linf };

/// Distance between two CSV files with identical headers and row counts over
/// every column but the first: l1 is the mean absolute difference, linf the
/// largest.
double compare_csv(const std::filesystem::path& a, const std::filesystem::path& b,
                   CompareMetric metric);

/// Exit status for an error category: 2 config, 3 numerical, 4 I/O.
int exit_code(const std::exception& e);
/// One-line JSON error record.
std::string error_record(const std::exception& e);

}  // namespace dqm
