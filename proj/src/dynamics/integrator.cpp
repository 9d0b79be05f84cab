#include "safectl/dynamics/integrator.hpp"

#include "safectl/errors.hpp"
#include "safectl/numopt/discretize.hpp"

namespace safectl::dynamics {

Eigen::VectorXd rk4_step(const DynamicsModel& model, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, double dt,
                         const std::optional<Eigen::VectorXd>& extra_accel) {
  if (!(dt > 0)) throw DimensionError("rk4_step: dt must be positive");
  const auto& ch = model.accel_channels();
  if (extra_accel && extra_accel->size() != static_cast<long>(ch.size()))
    throw DimensionError("rk4_step: extra_accel size mismatch");

  auto f = [&](const Eigen::VectorXd& xs) {
    Eigen::VectorXd xd = model.dynamics(xs, u);
    if (extra_accel) {
      for (size_t i = 0; i < ch.size(); ++i) xd(ch[i]) += (*extra_accel)(i);
    }
    return xd;
  };

  Eigen::VectorXd k1 = f(x);
  Eigen::VectorXd k2 = f(x + 0.5 * dt * k1);
  Eigen::VectorXd k3 = f(x + 0.5 * dt * k2);
  Eigen::VectorXd k4 = f(x + dt * k3);
  Eigen::VectorXd x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!x_next.allFinite()) throw NonFiniteError("rk4_step: state diverged");
  return x_next;
}

Eigen::VectorXd rk4_substeps(const DynamicsModel& model, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& u, double dt, int substeps,
                             const std::optional<Eigen::VectorXd>& extra_accel) {
  if (substeps < 1) throw DimensionError("rk4_substeps: substeps must be >= 1");
  Eigen::VectorXd xi = x;
  const double h = dt / substeps;
  for (int i = 0; i < substeps; ++i) xi = rk4_step(model, xi, u, h, extra_accel);
  return xi;
}

DiscreteLinearization linearize_discrete(const DynamicsModel& model,
                                         const Eigen::VectorXd& x_ref,
                                         const Eigen::VectorXd& u_ref, double dt) {
  Eigen::MatrixXd A, B;
  model.jacobians(x_ref, u_ref, A, B);
  auto zoh = numopt::zoh_discretize(A, B, dt);
  DiscreteLinearization lin;
  lin.Ad = zoh.Ad;
  lin.Bd = zoh.Bd;
  lin.offset = zoh.M * model.dynamics(x_ref, u_ref);
  return lin;
}

}  // namespace safectl::dynamics
