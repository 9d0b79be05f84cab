#pragma once

#include <Eigen/Dense>
#include <optional>

#include "safectl/envs/environment.hpp"

namespace safectl::safefilters {

struct MpscConfig {
  int horizon = 25;
  double terminal_halfwidth = 0.01;  // box around the reference at the horizon end
  double slack_penalty = 1e6;
  double constraint_margin = 1e-3;   // base tightening of state rows
};

/// Predictive safety filter: projects a proposed input onto the set of
/// inputs from which the prior model can still satisfy the constraints over
/// the horizon and reach a terminal box. The proposed input is first checked
/// as-is so certifiably safe inputs pass through bit-exactly.
class MpscFilter {
 public:
  explicit MpscFilter(MpscConfig cfg = {}) : cfg_(cfg) {}

  void episode_init(const envs::ResetInfo& info);

  struct Result {
    Eigen::VectorXd u_safe;
    bool certified = false;  // solved without slack
    bool modified = false;
    double max_slack = 0.0;
  };
  Result filter(const Eigen::VectorXd& u_proposed, const Eigen::VectorXd& x, int step);

 private:
  MpscConfig cfg_;
  envs::ResetInfo info_;
  Eigen::VectorXd backup_;  // last certified input; equilibrium input initially
  std::optional<Eigen::VectorXd> warm_;
};

}  // namespace safectl::safefilters
