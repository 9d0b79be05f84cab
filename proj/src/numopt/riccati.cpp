#include "safectl/numopt/riccati.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <unsupported/Eigen/KroneckerProduct>
#include <cmath>

#include "safectl/errors.hpp"

namespace safectl::numopt {

namespace {

double max_real_eig(const Eigen::MatrixXd& M) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

double max_abs_eig(const Eigen::MatrixXd& M) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Solve F'X + XF = -C for X via the Kronecker system (n <= 8 here).
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& F, const Eigen::MatrixXd& C) {
  const int n = static_cast<int>(F.rows());
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd M = Eigen::kroneckerProduct(I, F.transpose()).eval() +
                      Eigen::kroneckerProduct(F.transpose(), I).eval();
  Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(C.data(), n * n);
  Eigen::VectorXd x = M.fullPivLu().solve(-c);
  Eigen::MatrixXd X = Eigen::Map<Eigen::MatrixXd>(x.data(), n, n);
  return 0.5 * (X + X.transpose());
}

// Bass construction: a gain K0 with A - B K0 Hurwitz, via the shifted
// Lyapunov equation (A + beta I) W + W (A + beta I)' = 2 B B'.
Eigen::MatrixXd stabilizing_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const int n = static_cast<int>(A.rows());
  if (max_real_eig(A) < -1e-12) return Eigen::MatrixXd::Zero(B.cols(), n);
  double beta = A.norm() + 1.0;
  Eigen::MatrixXd As = A + beta * Eigen::MatrixXd::Identity(n, n);
  // As W + W As' = 2 B B'  (As positive stable, so the equation is regular).
  Eigen::MatrixXd W = solve_lyapunov(As.transpose(), -2.0 * B * B.transpose());
  Eigen::MatrixXd K0 = B.transpose() * W.fullPivLu().inverse();
  if (!K0.allFinite() || max_real_eig(A - B * K0) >= -1e-12)
    throw NonStabilizableError("solve_care: could not find a stabilizing initial gain");
  return K0;
}

}  // namespace

double care_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                     const Eigen::MatrixXd& P) {
  Eigen::MatrixXd Rinv = R.fullPivLu().inverse();
  return (A.transpose() * P + P * A - P * B * Rinv * B.transpose() * P + Q).norm();
}

double dare_residual(const Eigen::MatrixXd& Ad, const Eigen::MatrixXd& Bd,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                     const Eigen::MatrixXd& P) {
  Eigen::MatrixXd S = R + Bd.transpose() * P * Bd;
  Eigen::MatrixXd T = Ad.transpose() * P * Bd;
  return (Ad.transpose() * P * Ad - P - T * S.fullPivLu().solve(T.transpose()) + Q).norm();
}

RiccatiSolution solve_care(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
  const int n = static_cast<int>(A.rows());
  if (B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols())
    throw DimensionError("solve_care: inconsistent dimensions");

  Eigen::MatrixXd Rinv = R.fullPivLu().inverse();
  Eigen::MatrixXd K = stabilizing_gain(A, B);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);

  for (int it = 0; it < 60; ++it) {
    Eigen::MatrixXd Acl = A - B * K;
    Eigen::MatrixXd P_next =
        solve_lyapunov(Acl, Q + K.transpose() * R * K);
    Eigen::MatrixXd K_next = Rinv * B.transpose() * P_next;
    double dp = (P_next - P).norm();
    P = P_next;
    K = K_next;
    if (dp <= 1e-14 * std::max(1.0, P.norm())) break;
  }

  RiccatiSolution sol;
  sol.P = 0.5 * (P + P.transpose());
  sol.K = Rinv * B.transpose() * sol.P;
  sol.residual_norm = care_residual(A, B, Q, R, sol.P);
  if (!sol.P.allFinite() || sol.residual_norm > kRiccatiTol)
    throw NonStabilizableError("solve_care: iteration did not converge");
  if (Q.norm() > 0 && max_real_eig(A - B * sol.K) >= 0)
    throw NonStabilizableError("solve_care: closed loop not Hurwitz");
  return sol;
}

RiccatiSolution solve_dare(const Eigen::MatrixXd& Ad, const Eigen::MatrixXd& Bd,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
  const int n = static_cast<int>(Ad.rows());
  if (Bd.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != Bd.cols() ||
      R.cols() != Bd.cols())
    throw DimensionError("solve_dare: inconsistent dimensions");

  // Structure-preserving doubling.
  Eigen::MatrixXd Ak = Ad;
  Eigen::MatrixXd Gk = Bd * R.fullPivLu().solve(Bd.transpose());
  Eigen::MatrixXd Hk = Q;
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(I + Gk * Hk);
    if (!lu.isInvertible()) throw NonStabilizableError("solve_dare: singular doubling step");
    Eigen::MatrixXd W = lu.solve(Ak);           // (I + G H)^{-1} A
    Eigen::MatrixXd V = lu.solve(Gk);           // (I + G H)^{-1} G
    Eigen::MatrixXd A_next = Ak * W;
    Eigen::MatrixXd G_next = Gk + Ak * V * Ak.transpose();
    Eigen::MatrixXd H_next = Hk + W.transpose() * Hk * Ak;
    double dh = (H_next - Hk).norm();
    Ak = A_next;
    Gk = 0.5 * (G_next + G_next.transpose());
    Hk = 0.5 * (H_next + H_next.transpose());
    if (!Hk.allFinite() || Hk.norm() > 1e14)
      throw NonStabilizableError("solve_dare: iteration diverged");
    if (dh <= 1e-14 * std::max(1.0, Hk.norm())) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NonStabilizableError("solve_dare: iteration did not converge");

  RiccatiSolution sol;
  sol.P = 0.5 * (Hk + Hk.transpose());
  Eigen::MatrixXd S = R + Bd.transpose() * sol.P * Bd;
  sol.K = S.fullPivLu().solve(Bd.transpose() * sol.P * Ad);
  sol.residual_norm = dare_residual(Ad, Bd, Q, R, sol.P);
  if (sol.residual_norm > kRiccatiTol)
    throw NonStabilizableError("solve_dare: residual above tolerance");
  if (Q.norm() > 0 && max_abs_eig(Ad - Bd * sol.K) >= 1.0)
    throw NonStabilizableError("solve_dare: closed loop not Schur stable");
  return sol;
}

}  // namespace safectl::numopt
