#pragma once

#include <Eigen/Dense>
#include <memory>

#include "safectl/envs/environment.hpp"

namespace safectl::control {

/// Closed-loop policy consuming the prior model disclosed on reset.
/// Instances own per-episode mutable state (warm starts); use one instance
/// per concurrently running episode.
class Controller {
 public:
  virtual ~Controller() = default;

  virtual void episode_init(const envs::ResetInfo& info) = 0;
  virtual Eigen::VectorXd act(const Eigen::VectorXd& obs, int step) = 0;
};

}  // namespace safectl::control
