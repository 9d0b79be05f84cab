#pragma once

#include <memory>
#include <vector>

#include "safectl/constraints/constraints.hpp"
#include "safectl/control/controller.hpp"
#include "safectl/dynamics/model.hpp"
#include "safectl/envs/environment.hpp"
#include "safectl/numopt/qp.hpp"

namespace safectl::control {

/// Learned correction to the prior's discrete one-step map:
///   x_next = f_d_prior(x, u) + mean(x, u),  with per-dimension variance
/// for horizon-accumulated constraint tightening. Implementations must be
/// deterministic.
class ResidualModel {
 public:
  virtual ~ResidualModel() = default;
  virtual void predict(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       Eigen::VectorXd& mean, Eigen::VectorXd& var) const = 0;
};

enum class MpcMode { Linear, Nonlinear };

struct MpcConfig {
  int horizon = 25;
  MpcMode mode = MpcMode::Linear;
  int sqp_iters = 3;          // Nonlinear only
  double sqp_damping = 1.0;   // fraction of the QP step applied per SQP pass
  Eigen::MatrixXd P_f;        // terminal weight; empty -> DARE at equilibrium
  bool warm_start = true;
  double slack_penalty = 1e6; // quadratic penalty on state-row slacks
  double z_score = 1.96;      // residual-variance tightening multiplier
  /// Base tightening of every state constraint, absorbing the QP solve
  /// tolerance so closed-loop trajectories stay strictly feasible.
  double constraint_margin = 1e-3;
};

/// Everything the solver needs besides the current state; assembled from
/// ResetInfo by the controller.
struct MpcProblem {
  dynamics::DynamicsModel prior = dynamics::DynamicsModel::cart_pole();
  envs::TaskSpec task;
  constraints::ConstraintSet constraint_set;
  Eigen::VectorXd u_lower, u_upper;
  double dt = 0.02;
  int physics_substeps = 20;
};

struct MpcSolution {
  Eigen::VectorXd u0;
  std::vector<Eigen::VectorXd> x_pred;  // x_1..x_H
  std::vector<Eigen::VectorXd> u_pred;  // u_0..u_{H-1}
  numopt::QpStatus status = numopt::QpStatus::Solved;
  bool slack_used = false;
  double max_slack = 0.0;
  int qp_iterations = 0;
};

/// One receding-horizon solve. Linear mode takes a single QP about the
/// reference; Nonlinear mode runs damped SQP about `warm` (or a rollout of
/// the reference inputs when `warm` is empty). Infeasible QPs are re-solved
/// with slacks on the state-constraint rows so an input is always returned;
/// input bounds stay hard. `residual`, when set, corrects the dynamics with
/// its mean and tightens constraints by z_score times the accumulated
/// standard deviation along the horizon.
MpcSolution mpc_solve(const MpcConfig& cfg, const MpcProblem& prob,
                      const Eigen::VectorXd& x_now, int step,
                      const std::vector<Eigen::VectorXd>* warm_x = nullptr,
                      const std::vector<Eigen::VectorXd>* warm_u = nullptr,
                      const ResidualModel* residual = nullptr);

/// Computes the DARE terminal weight for `prob` at the equilibrium pair.
Eigen::MatrixXd mpc_terminal_weight(const MpcProblem& prob);

/// Receding-horizon controller; owns the shifted warm start between calls.
/// With cfg.mode == Nonlinear and a residual model attached this is the
/// GP-MPC loop; with no residual it is plain LMPC/NMPC.
class MpcController : public Controller {
 public:
  explicit MpcController(MpcConfig cfg = {}) : cfg_(cfg) {}

  void episode_init(const envs::ResetInfo& info) override;
  Eigen::VectorXd act(const Eigen::VectorXd& obs, int step) override;

  void set_residual_model(std::shared_ptr<const ResidualModel> residual) {
    residual_ = std::move(residual);
  }

  const MpcSolution& last_solution() const { return last_; }
  const MpcProblem& problem() const { return prob_; }

 private:
  MpcConfig cfg_;
  MpcProblem prob_;
  std::shared_ptr<const ResidualModel> residual_;
  MpcSolution last_;
  bool have_warm_ = false;
};

}  // namespace safectl::control
