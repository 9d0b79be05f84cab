// Command-line front end: run experiments, sweep robustness grids, benchmark
// throughput, validate configs. Exit codes: 0 success, 2 configuration
// error, 1 runtime failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "safectl/errors.hpp"
#include "safectl/harness/experiment.hpp"

namespace {

using namespace safectl;
using namespace safectl::harness;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig load_with_overrides(const std::string& path,
                                     const std::vector<std::string>& overrides) {
  std::string text = read_file(path);
  for (const auto& ov : overrides) text = apply_override(text, ov);
  return parse_config(text);
}

/// --seed replaces the config's seed list; SAFECTL_RESULTS_DIR re-roots the
/// output directory.
std::string resolve_output_dir(const ExperimentConfig& cfg) {
  if (const char* root = std::getenv("SAFECTL_RESULTS_DIR")) {
    return (std::filesystem::path(root) / cfg.output_dir).string();
  }
  return cfg.output_dir;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            bool have_seed, std::uint64_t seed) {
  ExperimentConfig cfg = load_with_overrides(config_path, overrides);
  if (have_seed) cfg.seeds = {seed};

  std::vector<EpisodeTrace> traces;
  for (auto s : cfg.seeds) traces.push_back(run_episode(cfg, s));

  const std::string dir = resolve_output_dir(cfg);
  export_results(cfg, traces, dir);

  int failures = 0;
  for (const auto& trace : traces) {
    Metrics m = compute_metrics(cfg, trace);
    std::printf("seed %llu: %s rmse=%.6g cost=%.6g violation_fraction=%.4g%s%s\n",
                static_cast<unsigned long long>(trace.seed),
                m.failure ? "FAILED" : (m.completed ? "completed" : "terminated"), m.rmse,
                m.quadratic_cost, m.violation_fraction, trace.error.empty() ? "" : " error=",
                trace.error.c_str());
    if (m.failure) ++failures;
  }
  std::printf("results written to %s\n", dir.c_str());
  return failures == 0 ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& kind_name, std::vector<double> grid, int workers) {
  ExperimentConfig cfg = load_with_overrides(config_path, overrides);
  SweepKind kind;
  if (kind_name == "pole_length") {
    kind = SweepKind::PoleLength;
    if (grid.empty()) grid = {0.5, 0.75, 1.0, 1.25, 1.5};
  } else if (kind_name == "action_noise") {
    kind = SweepKind::ActionNoise;
    if (grid.empty()) grid = {0.0, 0.025, 0.05, 0.075, 0.1};
  } else {
    throw ConfigError("sweep: kind must be pole_length or action_noise");
  }

  SweepResult res = robustness_sweep(cfg, kind, grid, cfg.seeds, workers);
  std::printf("%-12s %-12s %-12s %-12s %s\n", "value", "rmse_mean", "rmse_std",
              "violation", "failures");
  for (const auto& pt : res.points)
    std::printf("%-12g %-12.6g %-12.6g %-12.4g %d/%zu\n", pt.value, pt.rmse_mean,
                pt.rmse_std, pt.violation_mean, pt.failures, cfg.seeds.size());
  return 0;
}

int cmd_bench(const std::string& config_path, const std::vector<std::string>& overrides,
              std::uint64_t seed) {
  ExperimentConfig cfg = load_with_overrides(config_path, overrides);
  BenchResult b = benchmark_throughput(cfg, seed);
  std::printf("steps=%d sim_seconds=%.3f wall_seconds=%.3f realtime_factor=%.1f\n", b.steps,
              b.sim_seconds, b.wall_seconds, b.realtime_factor);
  return 0;
}

int cmd_validate(const std::string& config_path, const std::vector<std::string>& overrides,
                 bool dump) {
  ExperimentConfig cfg = load_with_overrides(config_path, overrides);
  if (dump) {
    std::cout << dump_config(cfg);
  } else {
    std::printf("ok: %s\n", config_path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"safe learning-based control benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool have_seed = false;
  std::string sweep_kind = "pole_length";
  std::vector<double> grid;
  int workers = 1;
  bool dump = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment YAML file")->required();
    sub->add_option("--override", overrides, "key.path=value applied before parsing");
  };

  auto* run = app.add_subcommand("run", "run the configured episodes and export results");
  add_common(run);
  run->add_option("--seed", seed, "run a single seed instead of the config's list")
      ->each([&](const std::string&) { have_seed = true; });

  auto* sweep = app.add_subcommand("sweep", "robustness grid over seeds");
  add_common(sweep);
  sweep->add_option("--kind", sweep_kind, "pole_length | action_noise");
  sweep->add_option("--grid", grid, "grid values (scale factors or sigmas)");
  sweep->add_option("--workers", workers, "worker threads");

  auto* bench = app.add_subcommand("bench", "closed-loop throughput measurement");
  add_common(bench);
  bench->add_option("--seed", seed, "episode seed");

  auto* validate = app.add_subcommand("validate", "parse and check a config");
  add_common(validate);
  validate->add_flag("--dump", dump, "print the canonical form");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, overrides, have_seed, seed);
    if (sweep->parsed()) return cmd_sweep(config_path, overrides, sweep_kind, grid, workers);
    if (bench->parsed()) return cmd_bench(config_path, overrides, seed);
    if (validate->parsed()) return cmd_validate(config_path, overrides, dump);
  } catch (const safectl::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
