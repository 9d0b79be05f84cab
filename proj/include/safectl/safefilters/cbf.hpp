#pragma once

#include <Eigen/Dense>
#include <vector>

#include "safectl/dynamics/model.hpp"

namespace safectl::safefilters {

/// Quadratic barrier over selected state channels v:
///   h(x) = level - (v - center)' P (v - center),   h >= 0 is the safe set.
/// Velocity channels folded into P give the barrier relative degree one in
/// the input for the mechanical systems here.
struct CbfSpec {
  std::vector<int> selector;  // state channels forming v
  Eigen::MatrixXd P;          // PSD, dim = selector.size()
  Eigen::VectorXd center;
  double level = 1.0;
  double gamma = 5.0;          // class-K slope: hdot >= -gamma (h - margin)
  double margin = 0.0;
  double slack_penalty = 1e6;
};

double cbf_value(const CbfSpec& spec, const Eigen::VectorXd& x);
Eigen::VectorXd cbf_gradient(const CbfSpec& spec, const Eigen::VectorXd& x);

struct CbfResult {
  Eigen::VectorXd u_safe;
  bool modified = false;  // true iff ||u_safe - u_proposed||_inf > 1e-9
  double slack = 0.0;     // violation of the barrier row after relaxation
};

/// Minimal input correction: min ||u - u_proposed||^2 subject to
/// hdot(x, u) >= -gamma (h - margin) and the input bounds, using the exact
/// control-affine decomposition f(x, u) = f(x, 0) + B(x) u. Falls back to a
/// slack-relaxed solve when infeasible, so an input is always returned.
CbfResult cbf_filter(const CbfSpec& spec, const dynamics::DynamicsModel& prior,
                     const Eigen::VectorXd& u_proposed, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u_lower, const Eigen::VectorXd& u_upper);

}  // namespace safectl::safefilters
