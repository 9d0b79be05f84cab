#pragma once

#include <cstdint>

#include "safectl/control/mpc.hpp"
#include "safectl/dynamics/model.hpp"
#include "safectl/safefilters/gp.hpp"

namespace safectl::safefilters {

/// Reservoir of one-step residuals y = x_next - f_d_prior(x, u) keyed on
/// z = [x; u]. Holds at most `capacity` transitions; once full, incoming
/// samples replace stored ones by seeded reservoir sampling so the kept set
/// is an unbiased, reproducible subsample of everything seen.
class ResidualDataset {
 public:
  ResidualDataset(const dynamics::DynamicsModel& prior, double dt, int physics_substeps,
                  int capacity = 200, std::uint64_t seed = 0);

  void add(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
           const Eigen::VectorXd& x_next);

  int size() const { return static_cast<int>(rows_); }
  long long seen() const { return seen_; }
  Eigen::MatrixXd inputs() const { return Z_.topRows(rows_); }
  Eigen::MatrixXd targets() const { return Y_.topRows(rows_); }

 private:
  dynamics::DynamicsModel prior_;
  double dt_;
  int substeps_;
  Eigen::MatrixXd Z_, Y_;
  Eigen::Index rows_ = 0;
  long long seen_ = 0;
  std::uint64_t state_;  // splitmix64 stream for reservoir replacement
};

/// GP over one-step residuals, pluggable into MpcController. Prediction is
/// clamped to zero when the model is empty so an untrained instance reduces
/// the surrounding MPC to its plain prior-model form.
class GpResidualModel : public control::ResidualModel {
 public:
  GpResidualModel() = default;
  explicit GpResidualModel(GpModel model) : model_(std::move(model)), trained_(true) {}

  static GpResidualModel fit(const ResidualDataset& data, const GpOptions& opts = {});

  bool trained() const { return trained_; }
  const GpModel& model() const { return model_; }

  void predict(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd& mean,
               Eigen::VectorXd& var) const override;

 private:
  GpModel model_;
  bool trained_ = false;
};

}  // namespace safectl::safefilters
