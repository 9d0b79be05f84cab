#pragma once

#include <Eigen/Dense>
#include <optional>

#include "safectl/dynamics/model.hpp"

namespace safectl::dynamics {

/// Classical fixed-step RK4 update with the input held over the step.
/// `extra_accel`, when present, is added to the acceleration entries of
/// xdot at every stage (external dynamics disturbances). Size must match
/// model.accel_channels(). Throws NonFiniteError on divergence.
Eigen::VectorXd rk4_step(const DynamicsModel& model, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, double dt,
                         const std::optional<Eigen::VectorXd>& extra_accel = {});

/// `substeps` consecutive rk4 steps of dt/substeps each with the same held input.
Eigen::VectorXd rk4_substeps(const DynamicsModel& model, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& u, double dt, int substeps,
                             const std::optional<Eigen::VectorXd>& extra_accel = {});

struct DiscreteLinearization {
  Eigen::MatrixXd Ad;
  Eigen::MatrixXd Bd;
  Eigen::VectorXd offset;  // exp-integral of f(x_ref, u_ref); zero at equilibria

  /// One-step prediction: x+ = x_ref + Ad (x - x_ref) + Bd (u - u_ref) + offset.
  Eigen::VectorXd predict(const Eigen::VectorXd& x_ref, const Eigen::VectorXd& u_ref,
                          const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    return x_ref + Ad * (x - x_ref) + Bd * (u - u_ref) + offset;
  }
};

/// ZOH discretization of the linearization about (x_ref, u_ref).
DiscreteLinearization linearize_discrete(const DynamicsModel& model,
                                         const Eigen::VectorXd& x_ref,
                                         const Eigen::VectorXd& u_ref, double dt);

}  // namespace safectl::dynamics
