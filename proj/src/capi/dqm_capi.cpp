#include "dqm/dqm.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dqm/error.hpp"
#include "dqm/scenario.hpp"

struct dqm_scenario {
  dqm::Scenario scenario;
  std::map<std::string, std::string> overrides;
};

namespace {

thread_local std::string last_error;

template <typename F>
dqm_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return DQM_OK;
  } catch (const std::exception& e) {
    last_error = dqm::error_record(e);
    return static_cast<dqm_status>(dqm::exit_code(e));
  } catch (...) {
    last_error = R"({"error":"numerical","exit_code":3,"message":"unknown failure"})";
    return DQM_ERR_NUMERICAL;
  }
}

dqm_status misuse(const char* what) {
  last_error = std::string(R"({"error":"argument","exit_code":1,"message":")") + what + "\"}";
  return DQM_ERR_ARGUMENT;
}

dqm_status copy_out(const std::string& text, char* buf, size_t capacity, size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (!buf) return needed ? DQM_OK : misuse("null buffer");
  if (capacity < text.size() + 1) return misuse("buffer too small");
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return DQM_OK;
}

}  // namespace

extern "C" {

const char* dqm_version(void) { return "1.0.0"; }

const char* dqm_last_error(void) { return last_error.c_str(); }

dqm_status dqm_scenario_parse(const char* text, dqm_scenario** out) {
  if (!text || !out) return misuse("null argument");
  *out = nullptr;
  return guarded([&] { *out = new dqm_scenario{dqm::parse_config(text), {}}; });
}

dqm_status dqm_scenario_load(const char* path, dqm_scenario** out) {
  if (!path || !out) return misuse("null argument");
  *out = nullptr;
  return guarded([&] {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw dqm::IoError(std::string("cannot read config ") + path);
    std::stringstream ss;
    ss << f.rdbuf();
    *out = new dqm_scenario{dqm::parse_config(ss.str()), {}};
  });
}

dqm_status dqm_scenario_set(dqm_scenario* scenario, const char* key, const char* value) {
  if (!scenario || !key || !value) return misuse("null argument");
  return guarded([&] {
    auto overrides = scenario->overrides;
    overrides[key] = value;
    scenario->scenario = dqm::parse_config(scenario->scenario.source, overrides);
    scenario->overrides = std::move(overrides);
  });
}

void dqm_scenario_free(dqm_scenario* scenario) { delete scenario; }

dqm_status dqm_scenario_resolved(const dqm_scenario* scenario, char* buf, size_t capacity,
                                 size_t* needed) {
  if (!scenario) return misuse("null scenario");
  return copy_out(dqm::resolved_config(scenario->scenario), buf, capacity, needed);
}

dqm_status dqm_output_root(char* buf, size_t capacity, size_t* needed) {
  std::string root;
  const auto st = guarded([&] { root = dqm::output_root().string(); });
  if (st != DQM_OK) return st;
  return copy_out(root, buf, capacity, needed);
}

dqm_status dqm_run(const dqm_scenario* scenario, const char* root, char* out_dir,
                   size_t capacity) {
  if (!scenario) return misuse("null scenario");
  std::string dir;
  const auto st = guarded([&] {
    const auto base = root ? std::filesystem::path(root) : dqm::output_root();
    dir = dqm::run_scenario(scenario->scenario, base).string();
  });
  if (st != DQM_OK || !out_dir) return st;
  return copy_out(dir, out_dir, capacity, nullptr);
}

dqm_status dqm_sweep(const dqm_scenario* scenario, const char* axis, const char* const* values,
                     size_t count, const char* oracle, const char* root, double* errors,
                     double* slope) {
  if (!scenario || !axis || !values || !oracle) return misuse("null argument");
  return guarded([&] {
    std::vector<std::string> v;
    for (size_t i = 0; i < count; ++i) {
      if (!values[i]) throw dqm::ConfigError("null sweep value");
      v.emplace_back(values[i]);
    }
    const auto base = root ? std::filesystem::path(root) : dqm::output_root();
    const auto report = dqm::run_sweep_to_disk(scenario->scenario, axis, v, oracle, base);
    if (errors)
      for (size_t i = 0; i < count; ++i) errors[i] = report.errors[i];
    if (slope) *slope = report.slope;
  });
}

dqm_status dqm_oracle_eval(const dqm_scenario* scenario, const char* name, double t,
                           double* value) {
  if (!scenario || !name || !value) return misuse("null argument");
  return guarded([&] { *value = dqm::evaluate_oracle(scenario->scenario, name, t); });
}

dqm_status dqm_compare(const char* csv_a, const char* csv_b, const char* metric, double* value) {
  if (!csv_a || !csv_b || !metric || !value) return misuse("null argument");
  return guarded([&] {
    const std::string m = metric;
    dqm::CompareMetric which;
    if (m == "l1")
      which = dqm::CompareMetric::l1;
    else if (m == "linf")
      which = dqm::CompareMetric::linf;
    else
      throw dqm::ConfigError("unknown metric '" + m + "' (expected l1|linf)");
    *value = dqm::compare_csv(csv_a, csv_b, which);
  });
}

}  // extern "C"
