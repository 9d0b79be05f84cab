#pragma once

#include <Eigen/Dense>

namespace safectl::numopt {

/// Cholesky solve M X = Y for SPD M with a jitter ladder: starting at
/// 1e-10 trace(M)/n, multiplied by 10 per retry, at most 5 retries.
/// Throws NotPdError when the ladder is exhausted.
Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& M, const Eigen::MatrixXd& Y);

/// The factorization behind chol_solve, exposed for reuse (GP fits solve
/// against the same kernel matrix repeatedly).
Eigen::LLT<Eigen::MatrixXd> chol_factor(const Eigen::MatrixXd& M);

}  // namespace safectl::numopt
