#pragma once

#include <Eigen/Dense>
#include <vector>

namespace safectl::envs {

enum class TaskKind { Stabilization, Tracking };

/// Reward convention: Quadratic uses the negated quadratic stage cost;
/// SparseCartPole pays 1 per step while |theta| <= theta_max and terminates
/// the episode when the threshold is exceeded.
enum class RewardKind { Quadratic, SparseCartPole };

struct TaskSpec {
  TaskKind kind = TaskKind::Stabilization;
  RewardKind reward = RewardKind::Quadratic;
  std::vector<Eigen::VectorXd> x_ref;  // length L + 1
  std::vector<Eigen::VectorXd> u_ref;  // length L
  Eigen::MatrixXd Q;                   // nx x nx, PSD
  Eigen::MatrixXd R;                   // nu x nu, PD
  int length = 250;                    // episode length L in control steps
  double theta_max = 0.2094;           // cart-pole termination threshold [rad]

  const Eigen::VectorXd& x_ref_at(int i) const {
    return x_ref[std::min<size_t>(i, x_ref.size() - 1)];
  }
  const Eigen::VectorXd& u_ref_at(int i) const {
    return u_ref[std::min<size_t>(i, u_ref.size() - 1)];
  }
};

/// J^Q = 1/2 sum_{i=0..L} dx_i' Q dx_i + 1/2 sum_{i=0..L-1} du_i' R du_i.
double quadratic_cost(const TaskSpec& task, const std::vector<Eigen::VectorXd>& states,
                      const std::vector<Eigen::VectorXd>& inputs);

}  // namespace safectl::envs
