#pragma once

#include <Eigen/Dense>

namespace safectl::numopt {

struct RiccatiSolution {
  Eigen::MatrixXd P;  // symmetric stabilizing solution
  Eigen::MatrixXd K;  // optimal gain
  double residual_norm = 0.0;
};

inline constexpr double kRiccatiTol = 1e-9;

/// Continuous-time algebraic Riccati equation
///   A'P + PA - PBR^{-1}B'P + Q = 0,   K = R^{-1}B'P.
/// Kleinman-Newton iteration from a stabilizing initial gain (Bass shifted
/// Lyapunov construction). Throws NonStabilizableError if no stabilizing
/// solution is found or the closed loop is not Hurwitz.
RiccatiSolution solve_care(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

/// Discrete-time algebraic Riccati equation
///   Ad'PAd - P - Ad'PBd(R + Bd'PBd)^{-1}Bd'PAd + Q = 0,
///   K = (R + Bd'PBd)^{-1}Bd'PAd.
/// Structure-preserving doubling iteration. Throws NonStabilizableError on
/// divergence or an unstable closed loop.
RiccatiSolution solve_dare(const Eigen::MatrixXd& Ad, const Eigen::MatrixXd& Bd,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

/// Frobenius norms of the Riccati residuals, for independent verification.
double care_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                     const Eigen::MatrixXd& P);
double dare_residual(const Eigen::MatrixXd& Ad, const Eigen::MatrixXd& Bd,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                     const Eigen::MatrixXd& P);

}  // namespace safectl::numopt
