#pragma once

#include "safectl/control/controller.hpp"
#include "safectl/dynamics/model.hpp"
#include "safectl/envs/task.hpp"

namespace safectl::control {

enum class LqrMode { Continuous, Discrete };

/// Time-invariant state-feedback policy u = u_op - K (x - x_op) about the
/// hover/upright equilibrium, evaluated against the moving reference at
/// run time for tracking tasks.
struct LqrPolicy {
  Eigen::MatrixXd K;
  Eigen::VectorXd x_op, u_op;
  LqrMode mode = LqrMode::Discrete;
};

/// Gain synthesis from the prior model: linearize at the equilibrium, then
/// CARE (Continuous) or ZOH + DARE (Discrete) with the task's Q and R.
LqrPolicy lqr_synthesize(const dynamics::DynamicsModel& prior, const envs::TaskSpec& task,
                         double dt, LqrMode mode);

class LqrController : public Controller {
 public:
  explicit LqrController(LqrMode mode = LqrMode::Discrete) : mode_(mode) {}

  void episode_init(const envs::ResetInfo& info) override;
  Eigen::VectorXd act(const Eigen::VectorXd& obs, int step) override;

  const LqrPolicy& policy() const { return policy_; }

 private:
  LqrMode mode_;
  LqrPolicy policy_;
  envs::TaskSpec task_;
};

}  // namespace safectl::control
