#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "safectl/control/ilqr.hpp"
#include "safectl/control/lqr.hpp"
#include "safectl/control/mpc.hpp"
#include "safectl/control/pid.hpp"
#include "safectl/envs/environment.hpp"
#include "safectl/envs/trajectory.hpp"
#include "safectl/safefilters/cbf.hpp"
#include "safectl/safefilters/mpsc.hpp"

namespace safectl::harness {

enum class Algorithm { Pid, Lqr, Ilqr, Lmpc, Nmpc, GpMpc };
enum class FilterKind { None, Cbf, Mpsc };

std::string to_string(Algorithm a);
std::string to_string(FilterKind k);

struct ControllerSpec {
  Algorithm algo = Algorithm::Lqr;
  control::LqrMode lqr_mode = control::LqrMode::Discrete;
  control::IlqrSettings ilqr;
  control::PidConfig pid;
  control::MpcConfig mpc;
  int gp_train_episodes = 2;   // data-collection episodes before a GP-MPC run
  int gp_capacity = 200;       // residual reservoir size
};

struct FilterSpec {
  FilterKind kind = FilterKind::None;
  safefilters::CbfSpec cbf;
  safefilters::MpscConfig mpsc;
};

/// Everything a run needs. `env` is fully assembled (model, task with
/// generated references, constraints, disturbances, randomization); the
/// trajectory block is kept alongside so the config can be dumped back out
/// canonically.
struct ExperimentConfig {
  envs::EnvConfig env;
  bool has_trajectory = false;
  envs::TrajectoryConfig trajectory;
  ControllerSpec controller;
  FilterSpec filter;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "results";
};

/// Parses and validates a YAML experiment file. Unknown keys anywhere are
/// rejected with their full field path; defaults are applied so two
/// semantically equal files produce equal configs. Throws ConfigError.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& yaml_text);

/// Canonical dump: every field explicit, fixed key order. load(dump(c))
/// round-trips to an equal config.
std::string dump_config(const ExperimentConfig& cfg);

/// Applies a `key.path=value` override to the YAML text before parsing.
std::string apply_override(const std::string& yaml_text, const std::string& assignment);

}  // namespace safectl::harness
