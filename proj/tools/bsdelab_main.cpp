#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bsdelab/errors.hpp"
#include "bsdelab/experiments.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;

void print_result(const bsdelab::ExperimentResult& res) {
  for (const auto& c : res.checks) {
    std::printf("[%s] %-44s value=%-13.6g threshold=%-13.6g %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                c.value, c.threshold, c.detail.c_str());
  }
  std::printf("%s: %zu checks, %s\n", res.case_name.c_str(), res.checks.size(),
              res.all_pass() ? "all passed" : "FAILURES present");
}

int run_mode(const std::string& config, std::uint64_t seed, bool seed_set, const std::string& out, int jobs,
             bool svg, bsdelab::RunMode mode) {
  bsdelab::ExperimentConfig cfg;
  try {
    cfg = bsdelab::load_config(config);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (seed_set) cfg.seed = seed;
  cfg.out_dir = out;
  cfg.jobs = jobs;
  cfg.svg = svg;
  cfg.mode = mode;
  try {
    const bsdelab::ExperimentResult res = bsdelab::run_experiment(cfg);
    print_result(res);
    return res.all_pass() ? kExitPass : kExitCheckFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const bsdelab::SolveError& e) {
    std::cerr << "solver error [" << cfg.case_name << "]: " << e.what() << "\n";
    return kExitCheckFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bsdelab: backward-equation and obstacle-problem workbench"};
  app.require_subcommand(1);

  std::string config, out = ".", filter;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool svg = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "config file path or built-in case name")->required();
    cmd->add_option("--seed", seed, "RNG seed (overrides the config)");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--jobs", jobs, "worker cap for path simulation");
    cmd->add_flag("--svg", svg, "emit SVG plots");
  };

  CLI::App* run = app.add_subcommand("run", "run a named experiment end to end");
  add_common(run);
  CLI::App* sweep = app.add_subcommand("sweep", "run only the convergence-sweep portion");
  add_common(sweep);
  CLI::App* bridge = app.add_subcommand("bridge", "run only the cross-validation portion");
  add_common(bridge);

  CLI::App* list = app.add_subcommand("list", "list built-in experiments");
  list->add_option("--filter", filter, "substring filter over names and claims");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitPass : kExitUsage;
  }

  if (list->parsed()) {
    for (const auto& c : bsdelab::filter_catalog(filter))
      std::printf("%-24s %s\n%-24s   exercises: %s\n", c.name.c_str(), c.description.c_str(), "", c.claim.c_str());
    return kExitPass;
  }

  const bool seed_set = run->count("--seed") || sweep->count("--seed") || bridge->count("--seed");
  if (run->parsed()) return run_mode(config, seed, seed_set, out, jobs, svg, bsdelab::RunMode::full);
  if (sweep->parsed()) return run_mode(config, seed, seed_set, out, jobs, svg, bsdelab::RunMode::sweep);
  if (bridge->parsed()) return run_mode(config, seed, seed_set, out, jobs, svg, bsdelab::RunMode::bridge);
  return kExitUsage;
}
