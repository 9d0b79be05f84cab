#include "safectl/control/pid.hpp"

#include <algorithm>
#include <cmath>

#include "safectl/errors.hpp"

namespace safectl::control {

namespace {

double clamp_sym(double v, double lim) { return std::clamp(v, -lim, lim); }

}  // namespace

Eigen::VectorXd pid_act(const PidConfig& cfg, const dynamics::DynamicsModel& prior,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref, double dt,
                        Eigen::VectorXd& integral) {
  using dynamics::SystemId;
  switch (prior.id()) {
    case SystemId::Quad1D: {
      const auto& p = prior.quad_1d_params();
      if (integral.size() != 1) integral = Eigen::VectorXd::Zero(1);
      const double e = x_ref(0) - x(0);
      const double edot = x_ref(1) - x(1);
      integral(0) = clamp_sym(integral(0) + e * dt, cfg.integral_limit);
      const double az = cfg.kp_pos * e + cfg.kd_pos * edot + cfg.ki_pos * integral(0);
      Eigen::VectorXd u(1);
      u(0) = p.m * (p.g + az);
      return u;
    }
    case SystemId::Quad2D: {
      const auto& p = prior.quad_2d_params();
      if (integral.size() != 2) integral = Eigen::VectorXd::Zero(2);
      const double ex = x_ref(0) - x(0);
      const double exdot = x_ref(1) - x(1);
      const double ez = x_ref(2) - x(2);
      const double ezdot = x_ref(3) - x(3);
      integral(0) = clamp_sym(integral(0) + ex * dt, cfg.integral_limit);
      integral(1) = clamp_sym(integral(1) + ez * dt, cfg.integral_limit);
      const double ax = cfg.kp_pos * ex + cfg.kd_pos * exdot + cfg.ki_pos * integral(0);
      const double az =
          p.g + cfg.kp_pos * ez + cfg.kd_pos * ezdot + cfg.ki_pos * integral(1);

      // Outer loop: desired acceleration fixes pitch and collective thrust
      // (xddot = sin(theta) T/m, zddot = cos(theta) T/m - g).
      const double theta_des = std::atan2(ax, std::max(az, 0.1));
      const double thrust = p.m * std::sqrt(ax * ax + az * az);

      // Inner loop: pitch PD to differential thrust.
      const double tau =
          p.I_yy * (cfg.kp_att * (theta_des - x(4)) - cfg.kd_att * x(5));
      const double diff = tau / p.moment_arm();
      Eigen::VectorXd u(2);
      u(0) = 0.5 * (thrust - diff);
      u(1) = 0.5 * (thrust + diff);
      return u;
    }
    case SystemId::CartPole:
      throw UnsupportedError("pid: cart-pole is not supported by the cascade PID");
  }
  throw UnsupportedError("pid: unknown system");
}

void PidController::episode_init(const envs::ResetInfo& info) {
  prior_ = info.prior_model;
  task_ = info.task;
  dt_ = info.control_dt;
  integral_.resize(0);
}

Eigen::VectorXd PidController::act(const Eigen::VectorXd& obs, int step) {
  return pid_act(cfg_, prior_, obs, task_.x_ref_at(step), dt_, integral_);
}

}  // namespace safectl::control
