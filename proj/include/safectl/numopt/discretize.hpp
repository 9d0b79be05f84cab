#pragma once

#include <Eigen/Dense>

namespace safectl::numopt {

/// Matrix exponential by scaling-and-squaring with a degree-6 Taylor
/// polynomial, scaled so that the 1-norm of the scaled matrix is <= 0.5.
Eigen::MatrixXd expm(const Eigen::MatrixXd& M);

struct ZohResult {
  Eigen::MatrixXd Ad;
  Eigen::MatrixXd Bd;
  Eigen::MatrixXd M;  // integral of exp(A tau) over [0, dt]
};

/// Zero-order-hold discretization: Ad = exp(A dt), Bd = int_0^dt exp(A tau) d tau B,
/// both obtained from one augmented matrix exponential. M is the exponential
/// integral itself, used for affine offsets.
ZohResult zoh_discretize(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double dt);

}  // namespace safectl::numopt
