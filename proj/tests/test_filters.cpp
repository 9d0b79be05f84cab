#include <doctest.h>

#include <cmath>
#include <random>

#include "safectl/control/lqr.hpp"
#include "safectl/control/mpc.hpp"
#include "safectl/dynamics/integrator.hpp"
#include "safectl/safefilters/cbf.hpp"
#include "safectl/safefilters/gpmpc.hpp"
#include "safectl/safefilters/mpsc.hpp"

using namespace safectl;
using namespace safectl::safefilters;
using dynamics::DynamicsModel;

namespace {

envs::TaskSpec hover_task(const DynamicsModel& m, int length) {
  envs::TaskSpec t;
  t.Q = Eigen::MatrixXd::Identity(m.nx(), m.nx());
  t.R = Eigen::MatrixXd::Identity(m.nu(), m.nu());
  t.length = length;
  t.x_ref.assign(length + 1, m.equilibrium_state());
  t.u_ref.assign(length, m.equilibrium_input());
  return t;
}

/// Ellipsoidal barrier on (z, zdot) for the 1D quadrotor; the velocity
/// coupling makes the barrier depend on thrust through zdot.
CbfSpec quad1d_barrier() {
  CbfSpec spec;
  spec.selector = {0, 1};
  spec.P.resize(2, 2);
  spec.P << 1.0, 0.5, 0.5, 0.5;
  spec.center = Eigen::VectorXd::Zero(2);
  spec.level = 0.04;  // |z| <~ 0.2 at rest
  spec.gamma = 5.0;
  spec.margin = 0.002;
  return spec;
}

}  // namespace

TEST_CASE("CBF leaves a feasible proposal untouched") {
  auto m = DynamicsModel::quad_1d();
  auto spec = quad1d_barrier();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);  // center of the safe set
  Eigen::VectorXd up(1);
  up << m.quad_1d_params().m * 9.8;
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd hi(1);
  hi << 2 * m.quad_1d_params().m * 9.8;
  auto res = cbf_filter(spec, m, up, x, lo, hi);
  CHECK(!res.modified);
  CHECK(res.u_safe == up);
}

TEST_CASE("CBF enforces the derivative condition on the boundary") {
  auto m = DynamicsModel::quad_1d();
  auto spec = quad1d_barrier();
  Eigen::VectorXd x(2);
  x << 0.19, 0.05;  // near the edge, moving outward
  Eigen::VectorXd up(1);
  up << 2 * m.quad_1d_params().m * 9.8;  // full climb, pushing out
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd hi = up;
  auto res = cbf_filter(spec, m, up, x, lo, hi);
  CHECK(res.modified);
  const double h = cbf_value(spec, x);
  const double hdot = cbf_gradient(spec, x).dot(m.dynamics(x, res.u_safe));
  CHECK(hdot + spec.gamma * (h - spec.margin) >= -1e-5);
}

TEST_CASE("large gamma slackens the filter to identity in the interior") {
  auto m = DynamicsModel::quad_1d();
  auto spec = quad1d_barrier();
  Eigen::VectorXd x(2);
  x << 0.1, 0.05;  // interior: h > 0
  Eigen::VectorXd up(1);
  up << 2 * m.quad_1d_params().m * 9.8;
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd hi = up;
  auto strict = cbf_filter(spec, m, up, x, lo, hi);
  CHECK(strict.modified);
  spec.gamma = 1e6;
  auto loose = cbf_filter(spec, m, up, x, lo, hi);
  CHECK(!loose.modified);
}

TEST_CASE("CBF forward invariance over 100 seeded episodes") {
  auto m = DynamicsModel::quad_1d();
  auto spec = quad1d_barrier();
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd hi(1);
  hi << 2 * m.quad_1d_params().m * 9.8;

  int unfiltered_violations = 0;
  for (unsigned ep = 0; ep < 100; ++ep) {
    std::mt19937 rng(1000 + ep);
    std::uniform_real_distribution<double> uu(0.0, hi(0));
    std::uniform_real_distribution<double> ux(-0.1, 0.1);
    Eigen::VectorXd x(2);
    x << ux(rng), ux(rng);
    if (cbf_value(spec, x) <= 0) continue;
    Eigen::VectorXd xf = x;
    bool unfiltered_bad = false;
    for (int i = 0; i < 100; ++i) {
      Eigen::VectorXd up(1);
      up << uu(rng);
      auto res = cbf_filter(spec, m, up, xf, lo, hi);
      xf = dynamics::rk4_substeps(m, xf, res.u_safe, 0.02, 20);
      CHECK(cbf_value(spec, xf) >= -1e-6);
      if (!unfiltered_bad) {
        x = dynamics::rk4_substeps(m, x, up, 0.02, 20);
        unfiltered_bad = cbf_value(spec, x) < 0;
      }
    }
    unfiltered_violations += unfiltered_bad ? 1 : 0;
  }
  CHECK(unfiltered_violations >= 1);
}

TEST_CASE("MPSC passes a certifiably safe input through bit-exactly") {
  auto m = DynamicsModel::quad_1d();
  auto task = hover_task(m, 100);
  envs::ResetInfo info;
  info.prior_model = m;
  info.task = task;
  info.x0 = m.equilibrium_state();
  info.u_lower = Eigen::VectorXd::Zero(1);
  info.u_upper = Eigen::VectorXd::Constant(1, 2 * m.quad_1d_params().m * 9.8);
  Eigen::VectorXd lo(1), hi(1);
  lo << -0.5;
  hi << 0.5;
  info.constraint_set.items.push_back(
      constraints::ConstraintSpec::bound(constraints::ConstraintTarget::State, {0}, lo, hi));

  MpscFilter filter;
  filter.episode_init(info);
  Eigen::VectorXd up = m.equilibrium_input();
  auto res = filter.filter(up, m.equilibrium_state(), 0);
  CHECK(res.certified);
  CHECK(!res.modified);
  CHECK(res.u_safe == up);
}

TEST_CASE("MPSC projection keeps the closed loop feasible under a reckless policy") {
  auto m = DynamicsModel::quad_1d();
  auto task = hover_task(m, 150);
  envs::ResetInfo info;
  info.prior_model = m;
  info.task = task;
  info.x0 = m.equilibrium_state();
  info.u_lower = Eigen::VectorXd::Zero(1);
  info.u_upper = Eigen::VectorXd::Constant(1, 2 * m.quad_1d_params().m * 9.8);
  Eigen::VectorXd lo(1), hi(1);
  lo << -0.1;
  hi << 0.1;
  constraints::ConstraintSet set;
  set.items.push_back(
      constraints::ConstraintSpec::bound(constraints::ConstraintTarget::State, {0}, lo, hi));
  info.constraint_set = set;

  MpscFilter filter;
  filter.episode_init(info);
  Eigen::VectorXd x = m.equilibrium_state();
  bool ever_modified = false;
  for (int i = 0; i < 150; ++i) {
    Eigen::VectorXd up = info.u_upper;  // slam full thrust every step
    auto res = filter.filter(up, x, i);
    ever_modified = ever_modified || res.modified;
    x = dynamics::rk4_substeps(m, x, res.u_safe, 0.02, 20);
    CHECK(!constraints::any_violation(set, x, res.u_safe));
  }
  CHECK(ever_modified);
  CHECK(x(0) > 0.05);  // it got close to the bound, the filter was doing work
}

TEST_CASE("MPSC falls back to the backup input when the terminal set is unreachable") {
  auto m = DynamicsModel::quad_1d();
  auto task = hover_task(m, 100);
  Eigen::VectorXd far(2);
  far << 5.0, 0.0;
  task.x_ref.assign(101, far);  // unreachable within the horizon
  envs::ResetInfo info;
  info.prior_model = m;
  info.task = task;
  info.x0 = m.equilibrium_state();
  info.u_lower = Eigen::VectorXd::Zero(1);
  info.u_upper = Eigen::VectorXd::Constant(1, 2 * m.quad_1d_params().m * 9.8);

  MpscConfig cfg;
  cfg.horizon = 10;
  cfg.terminal_halfwidth = 0.0;
  MpscFilter filter(cfg);
  filter.episode_init(info);
  auto res = filter.filter(m.equilibrium_input(), m.equilibrium_state(), 0);
  CHECK(!res.certified);
  CHECK(res.u_safe == m.equilibrium_input());  // initial backup
}

TEST_CASE("residual GP halves one-step prediction error of a wrong prior") {
  auto truth = DynamicsModel::quad_1d();
  auto prior = truth.scaled(1.5);  // 1.5x mass prior
  const double dt = 0.02;

  ResidualDataset data(prior, dt, 20, 200, /*seed=*/7);
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> uu(0.0, 2 * truth.quad_1d_params().m * 9.8);
  std::uniform_real_distribution<double> ux(-0.3, 0.3);

  std::vector<std::tuple<Eigen::VectorXd, Eigen::VectorXd, Eigen::VectorXd>> held_out;
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd x(2);
    x << ux(rng), ux(rng);
    Eigen::VectorXd u(1);
    u << uu(rng);
    Eigen::VectorXd xn = dynamics::rk4_substeps(truth, x, u, dt, 20);
    if (i < 150)
      data.add(x, u, xn);
    else
      held_out.emplace_back(x, u, xn);
  }
  auto gp = GpResidualModel::fit(data);

  double err_prior = 0.0, err_gp = 0.0;
  for (const auto& [x, u, xn] : held_out) {
    Eigen::VectorXd pred = dynamics::rk4_substeps(prior, x, u, dt, 20);
    err_prior += (xn - pred).squaredNorm();
    Eigen::VectorXd mean, var;
    gp.predict(x, u, mean, var);
    err_gp += (xn - pred - mean).squaredNorm();
  }
  CHECK(std::sqrt(err_gp) <= 0.5 * std::sqrt(err_prior));
}

TEST_CASE("untrained residual model reduces GP-MPC to plain MPC") {
  auto m = DynamicsModel::quad_1d();
  auto task = hover_task(m, 100);
  control::MpcProblem prob;
  prob.prior = m;
  prob.task = task;
  control::MpcConfig cfg;
  cfg.mode = control::MpcMode::Nonlinear;
  Eigen::VectorXd x(2);
  x << 0.2, -0.05;
  GpResidualModel empty;
  auto plain = control::mpc_solve(cfg, prob, x, 0);
  auto with = control::mpc_solve(cfg, prob, x, 0, nullptr, nullptr, &empty);
  CHECK(plain.u0 == with.u0);
}

TEST_CASE("larger z-score narrows the feasible tube monotonically") {
  auto truth = DynamicsModel::quad_1d();
  auto prior = truth.scaled(1.5);
  const double dt = 0.02;
  ResidualDataset data(prior, dt, 20, 200, 7);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> uu(0.0, 2 * truth.quad_1d_params().m * 9.8);
  std::uniform_real_distribution<double> ux(-0.3, 0.3);
  for (int i = 0; i < 80; ++i) {
    Eigen::VectorXd x(2);
    x << ux(rng), ux(rng);
    Eigen::VectorXd u(1);
    u << uu(rng);
    data.add(x, u, dynamics::rk4_substeps(truth, x, u, dt, 20));
  }
  auto gp = std::make_shared<GpResidualModel>(GpResidualModel::fit(data));

  envs::TaskSpec task = hover_task(prior, 60);
  Eigen::VectorXd target(2);
  target << 0.4, 0.0;
  task.x_ref.assign(61, target);  // push against the bound below
  control::MpcProblem prob;
  prob.prior = prior;
  prob.task = task;
  Eigen::VectorXd lo(1), hi(1);
  lo << -0.2;
  hi << 0.2;
  prob.constraint_set.items.push_back(
      constraints::ConstraintSpec::bound(constraints::ConstraintTarget::State, {0}, lo, hi));

  auto peak_for = [&](double z) {
    control::MpcConfig cfg;
    cfg.mode = control::MpcMode::Nonlinear;
    cfg.z_score = z;
    auto sol =
        control::mpc_solve(cfg, prob, prior.equilibrium_state(), 0, nullptr, nullptr, gp.get());
    double peak = -1e9;
    for (const auto& xp : sol.x_pred) peak = std::max(peak, xp(0));
    return peak;
  };
  const double p0 = peak_for(0.0);
  const double p1 = peak_for(1.96);
  const double p2 = peak_for(4.0);
  CHECK(p1 <= p0 + 1e-9);
  CHECK(p2 <= p1 + 1e-9);
  CHECK(p2 < p0);  // strictly narrower with meaningful uncertainty
}
