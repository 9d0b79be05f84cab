#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "safectl/constraints/constraints.hpp"
#include "safectl/disturbances/disturbances.hpp"
#include "safectl/dynamics/model.hpp"
#include "safectl/envs/task.hpp"

namespace safectl::envs {

struct EnvConfig {
  dynamics::DynamicsModel model = dynamics::DynamicsModel::cart_pole();
  TaskSpec task;
  constraints::ConstraintSet constraint_set;
  std::vector<disturbances::DisturbanceSpec> disturbance_specs;
  disturbances::RandomizationSpec randomization;
  int physics_hz = 1000;
  int control_hz = 50;
  Eigen::VectorXd x0_nominal;        // defaults to the equilibrium state
  Eigen::VectorXd u_lower, u_upper;  // input saturation, applied at step
  /// Per-control-step external acceleration schedule added through the
  /// dynamics channel (scripted forces from outside the environment).
  std::vector<Eigen::VectorXd> external_accel_schedule;
};

/// Contents disclosed to controllers on reset: the (possibly scaled) prior
/// model, the realized initial state, the task, and the constraints.
struct ResetInfo {
  dynamics::DynamicsModel prior_model = dynamics::DynamicsModel::cart_pole();
  Eigen::VectorXd x0;
  TaskSpec task;
  constraints::ConstraintSet constraint_set;
  Eigen::VectorXd u_lower, u_upper;
  double control_dt = 0.02;
  int physics_substeps = 20;
};

struct StepInfo {
  Eigen::VectorXd constraint_values;  // on the true pre-noise state
  bool violation = false;
  Eigen::VectorXd true_state;
  int step = 0;
  bool failure = false;               // non-finite state reached
  Eigen::VectorXd input_proposed;     // before disturbance and clipping
  Eigen::VectorXd input_applied;      // after disturbance and clipping
  Eigen::VectorXd action_disturbance; // realized additive action disturbance
};

struct StepResult {
  Eigen::VectorXd obs;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Episodic environment around the closed-form models. Single-owner during
/// an episode; any number of independent instances can run concurrently.
class Environment {
 public:
  explicit Environment(EnvConfig cfg);

  std::pair<Eigen::VectorXd, ResetInfo> reset(std::uint64_t seed, int episode = 0);
  StepResult step(const Eigen::VectorXd& u);

  bool done() const { return done_; }
  int current_step() const { return step_; }
  const Eigen::VectorXd& true_state() const { return x_; }
  double accumulated_cost() const { return accumulated_cost_; }
  const EnvConfig& config() const { return cfg_; }
  double control_dt() const { return 1.0 / cfg_.control_hz; }
  int physics_substeps() const { return cfg_.physics_hz / cfg_.control_hz; }

 private:
  EnvConfig cfg_;
  dynamics::DynamicsModel true_model_;  // inertial randomization applied
  disturbances::SeedPlan plan_;
  int episode_ = 0;
  int step_ = 0;
  bool done_ = true;
  Eigen::VectorXd x_;
  double accumulated_cost_ = 0.0;

  double stage_reward(const Eigen::VectorXd& x_prev, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& x_next, bool is_last);
};

}  // namespace safectl::envs
