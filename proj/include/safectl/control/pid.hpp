#pragma once

#include "safectl/control/controller.hpp"
#include "safectl/dynamics/model.hpp"
#include "safectl/envs/task.hpp"

namespace safectl::control {

/// Desk-tuned cascade gains for the quadrotor systems. The outer loop turns
/// position error into a desired acceleration; for the planar quadrotor an
/// inner PD loop tracks the implied pitch with differential thrust.
struct PidConfig {
  double kp_pos = 8.0;
  double kd_pos = 4.0;
  double ki_pos = 0.5;
  double integral_limit = 1.0;  // anti-windup clamp on the accumulated error
  double kp_att = 60.0;
  double kd_att = 15.0;
};

/// u for the current state against the step's reference. Quadrotors only;
/// throws UnsupportedError for the cart-pole. `integral` accumulates the
/// position error (z for Quad1D, [x, z] for Quad2D) and is clamped in place.
Eigen::VectorXd pid_act(const PidConfig& cfg, const dynamics::DynamicsModel& prior,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref, double dt,
                        Eigen::VectorXd& integral);

class PidController : public Controller {
 public:
  explicit PidController(PidConfig cfg = {}) : cfg_(cfg) {}

  void episode_init(const envs::ResetInfo& info) override;
  Eigen::VectorXd act(const Eigen::VectorXd& obs, int step) override;

 private:
  PidConfig cfg_;
  dynamics::DynamicsModel prior_;
  envs::TaskSpec task_;
  double dt_ = 0.02;
  Eigen::VectorXd integral_;
};

}  // namespace safectl::control
