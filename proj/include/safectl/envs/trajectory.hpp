#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "safectl/dynamics/model.hpp"

namespace safectl::envs {

enum class TrajShape { Circle, Sine, Lemniscate, Square };

struct TrajectoryConfig {
  TrajShape shape = TrajShape::Circle;
  double scale = 1.0;     // meters (circle radius, sine amplitude, square side)
  double period = 5.0;    // seconds per revolution / cycle / perimeter
  double z_offset = 1.0;  // altitude of the pattern center for quadrotors
};

struct ReferenceTrajectory {
  std::vector<Eigen::VectorXd> x_ref;  // length L + 1
  std::vector<Eigen::VectorXd> u_ref;  // length L, the hover/equilibrium input
};

/// Analytic reference generation sampled at the control rate. Planar shapes
/// project onto the system's position channels: cart-pole uses x, the 1D
/// quadrotor uses the z component, the 2D quadrotor the full xz pattern.
/// Velocity references are the analytic time derivatives; the square shape
/// ramps velocity over 5% of each edge duration to avoid impulsive corners.
ReferenceTrajectory generate_trajectory(const TrajectoryConfig& cfg, int length, double dt,
                                        const dynamics::DynamicsModel& model);

}  // namespace safectl::envs
