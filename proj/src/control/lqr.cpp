#include "safectl/control/lqr.hpp"

#include "safectl/dynamics/integrator.hpp"
#include "safectl/numopt/discretize.hpp"
#include "safectl/numopt/riccati.hpp"

namespace safectl::control {

LqrPolicy lqr_synthesize(const dynamics::DynamicsModel& prior, const envs::TaskSpec& task,
                         double dt, LqrMode mode) {
  LqrPolicy policy;
  policy.mode = mode;
  policy.x_op = prior.equilibrium_state();
  policy.u_op = prior.equilibrium_input();

  Eigen::MatrixXd A, B;
  prior.jacobians(policy.x_op, policy.u_op, A, B);
  if (mode == LqrMode::Continuous) {
    policy.K = numopt::solve_care(A, B, task.Q, task.R).K;
  } else {
    auto zoh = numopt::zoh_discretize(A, B, dt);
    policy.K = numopt::solve_dare(zoh.Ad, zoh.Bd, task.Q, task.R).K;
  }
  return policy;
}

void LqrController::episode_init(const envs::ResetInfo& info) {
  task_ = info.task;
  policy_ = lqr_synthesize(info.prior_model, info.task, info.control_dt, mode_);
}

Eigen::VectorXd LqrController::act(const Eigen::VectorXd& obs, int step) {
  // Regulate against the (possibly moving) reference with the fixed gain.
  return task_.u_ref_at(step) - policy_.K * (obs - task_.x_ref_at(step));
}

}  // namespace safectl::control
