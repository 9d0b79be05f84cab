#pragma once

#include <vector>

#include "safectl/control/controller.hpp"
#include "safectl/dynamics/model.hpp"
#include "safectl/envs/task.hpp"

namespace safectl::control {

struct IlqrSolution {
  std::vector<Eigen::VectorXd> x_nom;  // length L + 1
  std::vector<Eigen::VectorXd> u_nom;  // length L
  std::vector<Eigen::MatrixXd> K;      // per-step feedback gains
  std::vector<Eigen::VectorXd> k;      // per-step feedforwards
  double final_cost = 0.0;
  int iterations = 0;
  std::vector<double> cost_trace;      // accepted-iteration costs, non-increasing
};

struct IlqrSettings {
  int max_iter = 50;
  double cost_tol = 1e-6;       // relative cost-decrease termination
  double reg_init = 1e-6;       // Levenberg-Marquardt ladder on the value Hessian
  double reg_max = 1e6;
  double reg_factor = 10.0;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int physics_substeps = 1;     // substeps per control step for the rollout
};

/// Trajectory optimization over the task horizon: backward Riccati passes on
/// local linearizations with regularization, forward rollouts with a
/// backtracking line search. Throws Error("ilqr: diverged") when the
/// regularization ladder is exhausted.
IlqrSolution ilqr_solve(const dynamics::DynamicsModel& prior, const envs::TaskSpec& task,
                        const Eigen::VectorXd& x0, double dt, const IlqrSettings& settings = {});

/// Runs the solved trajectory with its time-varying feedback.
class IlqrController : public Controller {
 public:
  explicit IlqrController(IlqrSettings settings = {}) : settings_(settings) {}

  void episode_init(const envs::ResetInfo& info) override;
  Eigen::VectorXd act(const Eigen::VectorXd& obs, int step) override;

  const IlqrSolution& solution() const { return solution_; }

 private:
  IlqrSettings settings_;
  IlqrSolution solution_;
};

}  // namespace safectl::control
