#include "safectl/safefilters/gpmpc.hpp"

#include "safectl/dynamics/integrator.hpp"
#include "safectl/errors.hpp"

namespace safectl::safefilters {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

ResidualDataset::ResidualDataset(const dynamics::DynamicsModel& prior, double dt,
                                 int physics_substeps, int capacity, std::uint64_t seed)
    : prior_(prior), dt_(dt), substeps_(physics_substeps), state_(seed ^ 0xd1b54a32d192ed03ULL) {
  Z_.resize(capacity, prior.nx() + prior.nu());
  Y_.resize(capacity, prior.nx());
}

void ResidualDataset::add(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                          const Eigen::VectorXd& x_next) {
  Eigen::VectorXd pred = dynamics::rk4_substeps(prior_, x, u, dt_, substeps_);
  Eigen::VectorXd z(prior_.nx() + prior_.nu());
  z << x, u;
  Eigen::VectorXd y = x_next - pred;

  ++seen_;
  if (rows_ < Z_.rows()) {
    Z_.row(rows_) = z;
    Y_.row(rows_) = y;
    ++rows_;
    return;
  }
  // Reservoir step: keep each seen sample with probability capacity / seen.
  const std::uint64_t r = splitmix64(state_) % static_cast<std::uint64_t>(seen_);
  if (r < static_cast<std::uint64_t>(Z_.rows())) {
    Z_.row(static_cast<Eigen::Index>(r)) = z;
    Y_.row(static_cast<Eigen::Index>(r)) = y;
  }
}

GpResidualModel GpResidualModel::fit(const ResidualDataset& data, const GpOptions& opts) {
  if (data.size() < 2) throw DimensionError("gpmpc: not enough residual samples to fit");
  return GpResidualModel(gp_fit(data.inputs(), data.targets(), opts));
}

void GpResidualModel::predict(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                              Eigen::VectorXd& mean, Eigen::VectorXd& var) const {
  if (!trained_) {
    mean = Eigen::VectorXd::Zero(x.size());
    var = Eigen::VectorXd::Zero(x.size());
    return;
  }
  Eigen::VectorXd z(x.size() + u.size());
  z << x, u;
  auto pred = gp_predict(model_, z);
  mean = pred.mean;
  var = pred.var;
}

}  // namespace safectl::safefilters
