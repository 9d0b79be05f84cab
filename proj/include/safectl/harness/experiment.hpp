#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "safectl/harness/config.hpp"

namespace safectl::harness {

/// One control step of a closed-loop run, recorded after the environment
/// transition. `obs` is what the controller saw when choosing the input.
struct StepRecord {
  int step = 0;
  Eigen::VectorXd obs;
  Eigen::VectorXd u_proposed;   // controller output, before any safety filter
  Eigen::VectorXd u_applied;    // what the environment actually integrated
  Eigen::VectorXd true_state;   // post-step
  double reward = 0.0;
  Eigen::VectorXd constraint_values;
  bool violation = false;
  bool filter_certified = true;
  bool filter_modified = false;
};

struct EpisodeTrace {
  std::uint64_t seed = 0;
  int episode = 0;
  Eigen::VectorXd x0;
  std::vector<StepRecord> steps;
  bool completed = false;       // full task length reached without failure
  bool failure = false;         // divergence or a controller/solver error
  std::string error;            // exception text when failure came from a throw
  double wall_seconds = 0.0;
};

struct Metrics {
  double rmse = 0.0;            // position channels for tracking, full state otherwise
  double quadratic_cost = 0.0;  // J^Q over the realized trajectory
  double total_reward = 0.0;
  double violation_fraction = 0.0;
  double filter_modified_fraction = 0.0;
  bool completed = false;
  bool failure = false;
};

/// Runs one closed-loop episode of `cfg` under `seed`. GP-MPC runs its
/// data-collection episodes first (distinct episode indices, same seed).
/// Controller or solver exceptions end the episode and are recorded in the
/// trace instead of propagating. `prior_override`, when set, replaces the
/// prior model disclosed to the controller and filters (robustness studies).
EpisodeTrace run_episode(const ExperimentConfig& cfg, std::uint64_t seed, int episode = 0,
                         const dynamics::DynamicsModel* prior_override = nullptr);

Metrics compute_metrics(const ExperimentConfig& cfg, const EpisodeTrace& trace);

/// RMSE channels used by compute_metrics: all states for stabilization,
/// the position channels for tracking.
std::vector<int> rmse_channels(const dynamics::DynamicsModel& model, envs::TaskKind kind);

enum class SweepKind {
  PoleLength,   // true inertial scale factor sweep, controller prior fixed at nominal
  ActionNoise,  // white-noise sigma on every input channel
};

struct SweepPoint {
  double value = 0.0;  // grid value (scale factor or sigma)
  std::vector<double> rmse;  // per seed, NaN for failed episodes
  std::vector<double> violation_fraction;
  double rmse_mean = 0.0, rmse_std = 0.0;
  double violation_mean = 0.0;
  int failures = 0;
};

struct SweepResult {
  SweepKind kind = SweepKind::PoleLength;
  std::vector<SweepPoint> points;
};

/// Grid x seeds evaluation with a fixed-size worker pool. Results are keyed
/// by (grid index, seed index) and independent of the worker count or
/// completion order. Episode failures are recorded, never fatal.
SweepResult robustness_sweep(const ExperimentConfig& base, SweepKind kind,
                             const std::vector<double>& grid,
                             const std::vector<std::uint64_t>& seeds, int workers = 1);

struct BenchResult {
  int steps = 0;
  double sim_seconds = 0.0;
  double wall_seconds = 0.0;
  double realtime_factor = 0.0;  // sim_seconds / wall_seconds
};

/// Full-fidelity closed-loop run with trace logging, timed end to end.
BenchResult benchmark_throughput(const ExperimentConfig& cfg, std::uint64_t seed = 0);

/// Writes `dir`/config.yaml (canonical dump), one trace CSV per episode, and
/// summary.json with per-episode metrics and aggregates. Output bytes depend
/// only on the inputs except the `created` metadata field of summary.json.
void export_results(const ExperimentConfig& cfg, const std::vector<EpisodeTrace>& traces,
                    const std::string& dir);

std::string trace_csv(const ExperimentConfig& cfg, const EpisodeTrace& trace);

}  // namespace safectl::harness
