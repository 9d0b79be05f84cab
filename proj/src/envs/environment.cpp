#include "safectl/envs/environment.hpp"

#include "safectl/dynamics/integrator.hpp"
#include "safectl/errors.hpp"

namespace safectl::envs {

double quadratic_cost(const TaskSpec& task, const std::vector<Eigen::VectorXd>& states,
                      const std::vector<Eigen::VectorXd>& inputs) {
  if (states.size() != inputs.size() + 1)
    throw DimensionError("quadratic_cost: need L+1 states and L inputs");
  double cost = 0.0;
  for (size_t i = 0; i < states.size(); ++i) {
    Eigen::VectorXd dx = states[i] - task.x_ref_at(static_cast<int>(i));
    cost += 0.5 * dx.dot(task.Q * dx);
  }
  for (size_t i = 0; i < inputs.size(); ++i) {
    Eigen::VectorXd du = inputs[i] - task.u_ref_at(static_cast<int>(i));
    cost += 0.5 * du.dot(task.R * du);
  }
  return cost;
}

Environment::Environment(EnvConfig cfg)
    : cfg_(std::move(cfg)), true_model_(cfg_.model) {
  if (cfg_.physics_hz % cfg_.control_hz != 0)
    throw DimensionError("Environment: physics_hz must be a multiple of control_hz");
  if (cfg_.x0_nominal.size() == 0) cfg_.x0_nominal = cfg_.model.equilibrium_state();
  if (cfg_.u_lower.size() == 0) {
    // Default saturation: cart-pole |F| <= 10 N, quadrotor thrust in [0, 2mg].
    switch (cfg_.model.id()) {
      case dynamics::SystemId::CartPole:
        cfg_.u_lower = Eigen::VectorXd::Constant(1, -10.0);
        cfg_.u_upper = Eigen::VectorXd::Constant(1, 10.0);
        break;
      case dynamics::SystemId::Quad1D: {
        const auto& p = cfg_.model.quad_1d_params();
        cfg_.u_lower = Eigen::VectorXd::Constant(1, 0.0);
        cfg_.u_upper = Eigen::VectorXd::Constant(1, 2.0 * p.m * p.g);
        break;
      }
      case dynamics::SystemId::Quad2D: {
        const auto& p = cfg_.model.quad_2d_params();
        cfg_.u_lower = Eigen::VectorXd::Constant(2, 0.0);
        cfg_.u_upper = Eigen::VectorXd::Constant(2, p.m * p.g);
        break;
      }
    }
  }
}

std::pair<Eigen::VectorXd, ResetInfo> Environment::reset(std::uint64_t seed, int episode) {
  plan_.master = seed;
  episode_ = episode;
  step_ = 0;
  done_ = false;
  accumulated_cost_ = 0.0;

  // Inertial randomization produces the episode's true model.
  true_model_ = cfg_.model;
  if (!cfg_.randomization.param_dist.empty()) {
    switch (cfg_.model.id()) {
      case dynamics::SystemId::CartPole: {
        auto p = cfg_.model.cart_pole_params();
        std::vector<double> nominal = {p.m_c, p.m_p, p.l};
        auto off = disturbances::sample_param_offsets(cfg_.randomization, nominal, plan_, episode_);
        p.m_c += off[0];
        if (off.size() > 1) p.m_p += off[1];
        if (off.size() > 2) p.l += off[2];
        true_model_ = dynamics::DynamicsModel::cart_pole(p);
        break;
      }
      case dynamics::SystemId::Quad1D: {
        auto p = cfg_.model.quad_1d_params();
        auto off = disturbances::sample_param_offsets(cfg_.randomization, {p.m}, plan_, episode_);
        p.m += off[0];
        true_model_ = dynamics::DynamicsModel::quad_1d(p);
        break;
      }
      case dynamics::SystemId::Quad2D: {
        auto p = cfg_.model.quad_2d_params();
        auto off = disturbances::sample_param_offsets(cfg_.randomization, {p.m, p.I_yy}, plan_,
                                                      episode_);
        p.m += off[0];
        if (off.size() > 1) p.I_yy += off[1];
        true_model_ = dynamics::DynamicsModel::quad_2d(p);
        break;
      }
    }
  }

  x_ = disturbances::sample_initial_state(cfg_.randomization, cfg_.x0_nominal, plan_, episode_);

  ResetInfo info;
  info.prior_model = true_model_.scaled(cfg_.randomization.prior_scaling);
  info.x0 = x_;
  info.task = cfg_.task;
  info.constraint_set = cfg_.constraint_set;
  info.u_lower = cfg_.u_lower;
  info.u_upper = cfg_.u_upper;
  info.control_dt = control_dt();
  info.physics_substeps = physics_substeps();
  return {x_, info};
}

double Environment::stage_reward(const Eigen::VectorXd& x_prev, const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& x_next, bool is_last) {
  if (cfg_.task.reward == RewardKind::SparseCartPole) {
    // +1 per executed step; termination is handled by the caller.
    (void)x_next;
    return 1.0;
  }
  Eigen::VectorXd dx = x_prev - cfg_.task.x_ref_at(step_);
  Eigen::VectorXd du = u - cfg_.task.u_ref_at(step_);
  double cost = 0.5 * dx.dot(cfg_.task.Q * dx) + 0.5 * du.dot(cfg_.task.R * du);
  if (is_last) {
    Eigen::VectorXd dxL = x_next - cfg_.task.x_ref_at(step_ + 1);
    cost += 0.5 * dxL.dot(cfg_.task.Q * dxL);
  }
  accumulated_cost_ += cost;
  return -cost;
}

StepResult Environment::step(const Eigen::VectorXd& u) {
  if (done_) throw EpisodeOverError("Environment::step called after episode end");
  if (u.size() != cfg_.model.nu()) throw DimensionError("Environment::step: input size");

  StepResult res;
  res.info.step = step_;
  res.info.input_proposed = u;

  // Disturb the action, then clip to the input bounds.
  Eigen::VectorXd u_applied = u;
  for (const auto& spec : cfg_.disturbance_specs) {
    if (spec.target == disturbances::DisturbanceTarget::Action)
      disturbances::apply_disturbance(spec, u_applied, plan_, episode_, step_);
  }
  res.info.action_disturbance = u_applied - u;
  u_applied = u_applied.cwiseMax(cfg_.u_lower).cwiseMin(cfg_.u_upper);
  res.info.input_applied = u_applied;

  // Dynamics disturbances act through the acceleration channels, held
  // constant over the control step.
  const auto n_accel = static_cast<int>(true_model_.accel_channels().size());
  Eigen::VectorXd extra = Eigen::VectorXd::Zero(n_accel);
  bool has_extra = false;
  for (const auto& spec : cfg_.disturbance_specs) {
    if (spec.target == disturbances::DisturbanceTarget::Dynamics) {
      disturbances::apply_disturbance(spec, extra, plan_, episode_, step_);
      has_extra = true;
    }
  }
  if (static_cast<size_t>(step_) < cfg_.external_accel_schedule.size()) {
    extra += cfg_.external_accel_schedule[step_];
    has_extra = true;
  }

  const Eigen::VectorXd x_prev = x_;
  const bool is_last = (step_ + 1 >= cfg_.task.length);
  try {
    x_ = dynamics::rk4_substeps(true_model_, x_, u_applied, control_dt(), physics_substeps(),
                                has_extra ? std::optional<Eigen::VectorXd>(extra) : std::nullopt);
  } catch (const NonFiniteError&) {
    done_ = true;
    res.done = true;
    res.info.failure = true;
    res.info.true_state = x_prev;
    res.obs = x_prev;
    res.info.constraint_values = Eigen::VectorXd::Zero(cfg_.constraint_set.total_rows());
    return res;
  }

  res.reward = stage_reward(x_prev, u_applied, x_, is_last);

  if (cfg_.task.reward == RewardKind::SparseCartPole) {
    done_ = is_last || std::abs(x_(2)) > cfg_.task.theta_max;
  } else {
    done_ = is_last;
  }
  ++step_;

  res.info.true_state = x_;
  res.info.constraint_values = evaluate_constraints(cfg_.constraint_set, x_, u_applied);
  res.info.violation = res.info.constraint_values.size() > 0 &&
                       res.info.constraint_values.maxCoeff() > constraints::kViolationTol;

  res.obs = x_;
  for (const auto& spec : cfg_.disturbance_specs) {
    if (spec.target == disturbances::DisturbanceTarget::Observation)
      disturbances::apply_disturbance(spec, res.obs, plan_, episode_, step_ - 1);
  }
  res.done = done_;
  return res;
}

}  // namespace safectl::envs
