#include "safectl/numopt/chol.hpp"

#include "safectl/errors.hpp"

namespace safectl::numopt {

Eigen::LLT<Eigen::MatrixXd> chol_factor(const Eigen::MatrixXd& M) {
  const int n = static_cast<int>(M.rows());
  if (M.cols() != n) throw DimensionError("chol_factor: matrix must be square");

  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() == Eigen::Success) return llt;

  double jitter = 1e-10 * M.trace() / n;
  if (!(jitter > 0)) jitter = 1e-10;
  for (int retry = 0; retry < 5; ++retry) {
    Eigen::MatrixXd Mj = M;
    Mj.diagonal().array() += jitter;
    llt.compute(Mj);
    if (llt.info() == Eigen::Success) return llt;
    jitter *= 10.0;
  }
  throw NotPdError("chol_factor: matrix not positive definite after max jitter");
}

Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& M, const Eigen::MatrixXd& Y) {
  if (Y.rows() != M.rows()) throw DimensionError("chol_solve: rhs size mismatch");
  return chol_factor(M).solve(Y);
}

}  // namespace safectl::numopt
