#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bsdelab/specs.hpp"

namespace bsdelab {

enum class RunMode { full, sweep, bridge };

struct ExperimentConfig {
  int schema_version = 1;
  std::string case_name;
  std::uint64_t seed = 987654321;
  std::string out_dir = ".";
  bool svg = false;
  int jobs = 1;
  RunMode mode = RunMode::full;
  std::map<std::string, double> params;
  std::vector<int> n_list;
  std::string raw_json;  // custom cases keep the parsed source

  double param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
  std::vector<int> schedule(const std::vector<int>& fallback) const { return n_list.empty() ? fallback : n_list; }
};

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct ExperimentResult {
  std::string case_name;
  std::vector<CheckResult> checks;
  std::vector<std::string> artifacts;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

struct CaseInfo {
  std::string name;
  std::string description;
  std::string claim;  // which convergence/inequality statement the case exercises
};

const std::vector<CaseInfo>& experiment_catalog();
std::vector<CaseInfo> filter_catalog(const std::string& needle);

/// Loads a config from a JSON file, or synthesizes one when `path_or_name`
/// names a built-in case. Parse and validation problems throw
/// std::invalid_argument with position context.
ExperimentConfig load_config(const std::string& path_or_name);

/// Runs the named experiment, writing CSV tables, the JSON summary and
/// optional SVG plots into cfg.out_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

void write_summary_json(const ExperimentResult& result, const std::string& filename);

/// Built-in coefficient families (constant, affine, trigonometric) for
/// configuration files; arbitrary coefficients stay programmatic.
DiffusionSpec diffusion_from_family(const std::string& family, const std::map<std::string, double>& p);
DriverSpec driver_from_family(const std::string& f_family, const std::string& terminal_family,
                              const std::map<std::string, double>& p);
MeasureData measure_from_family(const std::string& family, const std::map<std::string, double>& p);

}  // namespace bsdelab
