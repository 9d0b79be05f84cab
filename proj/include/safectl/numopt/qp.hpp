#pragma once

#include <Eigen/Dense>
#include <optional>

namespace safectl::numopt {

enum class QpStatus { Solved, MaxIter, Infeasible };

/// Convex QP in the form
///   min  1/2 z'Hz + g'z
///   s.t. lb <= A z <= ub
/// with H symmetric positive semidefinite. Equality rows are expressed
/// as lb(i) == ub(i); one-sided rows use +/- infinity.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;

  int num_vars() const { return static_cast<int>(g.size()); }
  int num_rows() const { return static_cast<int>(lb.size()); }
};

struct QpSettings {
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iter = 4000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  bool adaptive_rho = true;
  double eps_prim_inf = 1e-8;
};

struct QpSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd dual;
  QpStatus status = QpStatus::MaxIter;
  double primal_res = 0.0;
  double dual_res = 0.0;
  int iterations = 0;
};

/// Operator-splitting (ADMM) solver for dense QPs, with adaptive penalty.
/// Problems whose rows are all equalities (or that are unconstrained) are
/// solved exactly through the KKT system instead of iterating.
/// Deterministic: identical inputs yield identical outputs.
QpSolution solve_qp(const QpProblem& prob,
                    const std::optional<Eigen::VectorXd>& warm_start = {},
                    const QpSettings& settings = {});

}  // namespace safectl::numopt
