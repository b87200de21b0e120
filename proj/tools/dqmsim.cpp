#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dqm/dqm.h"

namespace {

int report(dqm_status st) {
  if (st == DQM_OK) return 0;
  std::fprintf(stderr, "%s\n", dqm_last_error());
  return st == DQM_ERR_ARGUMENT ? DQM_ERR_CONFIG : st;
}

struct Scenario {
  dqm_scenario* handle = nullptr;
  ~Scenario() { dqm_scenario_free(handle); }
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

const char* root_or_null(const std::string& root) { return root.empty() ? nullptr : root.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dissipative quantum dynamics simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dqm_version());

  std::string config, root;
  auto* run = app.add_subcommand("run", "run one scenario");
  run->add_option("config", config, "scenario file")->required();
  run->add_option("--root", root, "output root (default: DQM_OUTPUT_ROOT or cwd)");

  std::string axis, oracle_label;
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep against an oracle");
  sweep->add_option("config", config, "base scenario file")->required();
  sweep->add_option("--axis", axis, "key=v1,v2,...")->required();
  sweep->add_option("--oracle", oracle_label, "oracle label")->required();
  sweep->add_option("--root", root, "output root (default: DQM_OUTPUT_ROOT or cwd)");

  std::string oracle_name;
  std::vector<std::string> params;
  std::vector<double> times{1.0};
  auto* oracle = app.add_subcommand("oracle", "evaluate a reference curve");
  oracle->add_option("name", oracle_name, "oracle name")->required();
  oracle->add_option("--param", params, "key=value scenario setting (repeatable)");
  oracle->add_option("--t", times, "evaluation times")->delimiter(',');

  std::string csv_a, csv_b, metric = "l1";
  auto* compare = app.add_subcommand("compare", "distance between two CSV outputs");
  compare->add_option("a", csv_a)->required();
  compare->add_option("b", csv_b)->required();
  compare->add_option("--metric", metric, "l1|linf")->check(CLI::IsMember({"l1", "linf"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : DQM_ERR_CONFIG;
  }

  if (*run) {
    Scenario s;
    if (int rc = report(dqm_scenario_load(config.c_str(), &s.handle))) return rc;
    char dir[4096];
    if (int rc = report(dqm_run(s.handle, root_or_null(root), dir, sizeof dir))) return rc;
    std::printf("%s\n", dir);
    return 0;
  }

  if (*sweep) {
    const auto eq = axis.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "--axis expects key=v1,v2,...\n");
      return DQM_ERR_CONFIG;
    }
    const std::string key = axis.substr(0, eq);
    const auto values = split(axis.substr(eq + 1), ',');
    std::vector<const char*> ptrs;
    for (const auto& v : values) ptrs.push_back(v.c_str());
    Scenario s;
    if (int rc = report(dqm_scenario_load(config.c_str(), &s.handle))) return rc;
    std::vector<double> errors(values.size());
    double slope = NAN;
    if (int rc = report(dqm_sweep(s.handle, key.c_str(), ptrs.data(), ptrs.size(),
                                  oracle_label.c_str(), root_or_null(root), errors.data(), &slope)))
      return rc;
    std::printf("%s,error\n", key.c_str());
    for (std::size_t i = 0; i < values.size(); ++i)
      std::printf("%s,%.17g\n", values[i].c_str(), errors[i]);
    std::printf("# slope %.17g\n", slope);
    return 0;
  }

  if (*oracle) {
    std::string text = "solver = oracle\noracle = " + oracle_name + "\n";
    for (const auto& p : params) text += p + "\n";
    Scenario s;
    if (int rc = report(dqm_scenario_parse(text.c_str(), &s.handle))) return rc;
    std::printf("t,value\n");
    for (double t : times) {
      double v = 0.0;
      if (int rc = report(dqm_oracle_eval(s.handle, oracle_name.c_str(), t, &v))) return rc;
      std::printf("%.17g,%.17g\n", t, v);
    }
    return 0;
  }

  if (*compare) {
    double v = 0.0;
    if (int rc = report(dqm_compare(csv_a.c_str(), csv_b.c_str(), metric.c_str(), &v))) return rc;
    std::printf("%.17g\n", v);
    return 0;
  }
  return 0;
}
