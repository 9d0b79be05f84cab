#include "safectl/numopt/discretize.hpp"

#include <cmath>

#include "safectl/errors.hpp"

namespace safectl::numopt {

Eigen::MatrixXd expm(const Eigen::MatrixXd& M) {
  const int n = static_cast<int>(M.rows());
  if (M.cols() != n) throw DimensionError("expm: matrix must be square");

  // Scale until the 1-norm is <= 1/32; degree-6 truncation error then sits
  // well below the 1e-9 accuracy the discretization contract needs.
  constexpr double kThreshold = 1.0 / 32.0;
  double norm1 = M.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm1 > kThreshold) s = static_cast<int>(std::ceil(std::log2(norm1 / kThreshold)));
  Eigen::MatrixXd Ms = M / std::pow(2.0, s);

  Eigen::MatrixXd E = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= 6; ++k) {
    term = (term * Ms / static_cast<double>(k)).eval();
    E += term;
  }
  for (int k = 0; k < s; ++k) E = (E * E).eval();
  return E;
}

ZohResult zoh_discretize(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double dt) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  if (A.cols() != n || B.rows() != n) throw DimensionError("zoh_discretize: dimensions");
  if (!(dt > 0)) throw DimensionError("zoh_discretize: dt must be positive");

  // Augment with [B I] so one exponential yields Ad, Bd and the exp integral.
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(2 * n + m, 2 * n + m);
  aug.topLeftCorner(n, n) = A;
  aug.block(0, n, n, m) = B;
  aug.block(0, n + m, n, n) = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd E = expm(aug * dt);

  ZohResult out;
  out.Ad = E.topLeftCorner(n, n);
  out.Bd = E.block(0, n, n, m);
  out.M = E.block(0, n + m, n, n);
  return out;
}

}  // namespace safectl::numopt
