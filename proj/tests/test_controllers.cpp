#include <doctest.h>

#include <cmath>

#include "safectl/control/ilqr.hpp"
#include "safectl/control/lqr.hpp"
#include "safectl/control/mpc.hpp"
#include "safectl/control/pid.hpp"
#include "safectl/dynamics/integrator.hpp"
#include "safectl/envs/environment.hpp"
#include "safectl/envs/trajectory.hpp"
#include "safectl/errors.hpp"
#include "safectl/numopt/discretize.hpp"
#include "safectl/numopt/riccati.hpp"

using namespace safectl;
using namespace safectl::control;
using dynamics::DynamicsModel;

namespace {

envs::TaskSpec hover_task(const DynamicsModel& m, int length) {
  envs::TaskSpec t;
  t.kind = envs::TaskKind::Stabilization;
  t.Q = Eigen::MatrixXd::Identity(m.nx(), m.nx());
  t.R = Eigen::MatrixXd::Identity(m.nu(), m.nu());
  t.length = length;
  t.x_ref.assign(length + 1, m.equilibrium_state());
  t.u_ref.assign(length, m.equilibrium_input());
  return t;
}

envs::ResetInfo reset_info(const DynamicsModel& m, const envs::TaskSpec& task,
                           const Eigen::VectorXd& x0) {
  envs::ResetInfo info;
  info.prior_model = m;
  info.task = task;
  info.x0 = x0;
  info.control_dt = 0.02;
  info.physics_substeps = 20;
  return info;
}

/// Closed-loop rollout on the model itself (no environment, no noise).
std::pair<std::vector<Eigen::VectorXd>, std::vector<Eigen::VectorXd>> rollout(
    const DynamicsModel& m, Controller& ctl, const envs::TaskSpec& task,
    const Eigen::VectorXd& x0, double dt, int substeps) {
  std::vector<Eigen::VectorXd> xs{x0}, us;
  for (int i = 0; i < task.length; ++i) {
    us.push_back(ctl.act(xs.back(), i));
    xs.push_back(dynamics::rk4_substeps(m, xs.back(), us.back(), dt, substeps));
  }
  return {xs, us};
}

}  // namespace

TEST_CASE("continuous LQR gain for the 1D quadrotor matches the closed form") {
  // Double integrator through B = [0, 1/m]'. With Q = I, R = 1 the CARE for
  // P = [[p11, p12], [p12, p22]] gives p12 = m, p22 = m sqrt(2m + 1), so
  // K = (1/m) [p12, p22] = [1, sqrt(2m + 1)].
  auto m = DynamicsModel::quad_1d();
  auto task = hover_task(m, 100);
  auto policy = lqr_synthesize(m, task, 0.02, LqrMode::Continuous);
  const double mass = m.quad_1d_params().m;
  CHECK(policy.K(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(policy.K(0, 1) == doctest::Approx(std::sqrt(2.0 * mass + 1.0)).epsilon(1e-8));

  Eigen::MatrixXd A, B;
  m.jacobians(m.equilibrium_state(), m.equilibrium_input(), A, B);
  auto sol = numopt::solve_care(A, B, task.Q, task.R);
  CHECK(numopt::care_residual(A, B, task.Q, task.R, sol.P) <= 1e-10);
}

TEST_CASE("LQR closed-loop linearization is stable for all systems") {
  for (auto m : {DynamicsModel::cart_pole(), DynamicsModel::quad_1d(),
                 DynamicsModel::quad_2d()}) {
    auto task = hover_task(m, 100);
    Eigen::MatrixXd A, B;
    m.jacobians(m.equilibrium_state(), m.equilibrium_input(), A, B);

    auto cont = lqr_synthesize(m, task, 0.02, LqrMode::Continuous);
    Eigen::VectorXcd ev = (A - B * cont.K).eigenvalues();
    CHECK(ev.real().maxCoeff() < 0.0);

    auto disc = lqr_synthesize(m, task, 0.02, LqrMode::Discrete);
    auto zoh = numopt::zoh_discretize(A, B, 0.02);
    Eigen::VectorXcd evd = (zoh.Ad - zoh.Bd * disc.K).eigenvalues();
    CHECK(evd.cwiseAbs().maxCoeff() < 1.0);
  }
}

TEST_CASE("discrete LQR stabilizes the cart-pole from a tilted start") {
  auto m = DynamicsModel::cart_pole();
  auto task = hover_task(m, 250);
  task.Q = Eigen::Vector4d(10, 1, 10, 1).asDiagonal();
  task.R = 0.1 * Eigen::MatrixXd::Identity(1, 1);
  LqrController ctl(LqrMode::Discrete);
  Eigen::VectorXd x0(4);
  x0 << 0, 0, 0.1, 0;
  ctl.episode_init(reset_info(m, task, x0));
  auto [xs, us] = rollout(m, ctl, task, x0, 0.02, 20);
  CHECK(xs.back().cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("iLQR on the linear 1D quadrotor matches discrete LQR in <= 2 iterations") {
  auto m = DynamicsModel::quad_1d();
  const int L = 500;
  const double dt = 0.02;
  auto task = hover_task(m, L);
  Eigen::VectorXd x0(2);
  x0 << 0.1, 0.0;

  IlqrSettings st;
  st.physics_substeps = 1;
  auto sol = ilqr_solve(m, task, x0, dt, st);
  CHECK(sol.iterations <= 2);

  // Oracle: roll out the stationary discrete-LQR policy on the same
  // discretization and compare finite-horizon costs.
  auto policy = lqr_synthesize(m, task, dt, LqrMode::Discrete);
  std::vector<Eigen::VectorXd> xs{x0}, us;
  for (int i = 0; i < L; ++i) {
    us.push_back(task.u_ref_at(i) - policy.K * (xs.back() - task.x_ref_at(i)));
    xs.push_back(dynamics::rk4_substeps(m, xs.back(), us.back(), dt, 1));
  }
  const double lqr_cost = envs::quadratic_cost(task, xs, us);
  CHECK(sol.final_cost <= lqr_cost + 1e-12);
  CHECK(lqr_cost - sol.final_cost <= 1e-8);
}

TEST_CASE("iLQR from the reference returns zero feedforwards and zero cost") {
  auto m = DynamicsModel::quad_1d();
  auto task = hover_task(m, 50);
  auto sol = ilqr_solve(m, task, m.equilibrium_state(), 0.02);
  CHECK(sol.final_cost == doctest::Approx(0.0).epsilon(1e-12));
  for (const auto& k : sol.k) CHECK(k.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("iLQR cost trace is monotone non-increasing on the cart-pole") {
  auto m = DynamicsModel::cart_pole();
  auto task = hover_task(m, 150);
  Eigen::VectorXd x0(4);
  x0 << 0.0, 0.0, 0.6, 0.0;
  auto sol = ilqr_solve(m, task, x0, 0.02);
  REQUIRE(sol.cost_trace.size() >= 2);
  for (size_t i = 1; i < sol.cost_trace.size(); ++i)
    CHECK(sol.cost_trace[i] <= sol.cost_trace[i - 1] + 1e-12);
  CHECK(sol.final_cost < sol.cost_trace.front());
}

TEST_CASE("iLQR tracking controller follows a circle with the true model") {
  auto m = DynamicsModel::quad_2d();
  envs::TrajectoryConfig tc;
  tc.shape = envs::TrajShape::Circle;
  tc.scale = 0.3;
  tc.period = 6.0;
  tc.z_offset = 0.0;
  const int L = 250;
  auto ref = envs::generate_trajectory(tc, L, 0.02, m);
  envs::TaskSpec task = hover_task(m, L);
  task.kind = envs::TaskKind::Tracking;
  task.x_ref = ref.x_ref;
  task.u_ref = ref.u_ref;

  IlqrController ctl;
  ctl.episode_init(reset_info(m, task, ref.x_ref[0]));
  auto [xs, us] = rollout(m, ctl, task, ref.x_ref[0], 0.02, 20);
  double sq = 0.0;
  for (int i = 0; i <= L; ++i) {
    Eigen::Vector2d e(xs[i](0) - task.x_ref_at(i)(0), xs[i](2) - task.x_ref_at(i)(2));
    sq += e.squaredNorm();
  }
  CHECK(std::sqrt(sq / (L + 1)) < 0.05);
}

TEST_CASE("PID holds hover and reacts to offsets on the quadrotors") {
  PidConfig cfg;
  auto m1 = DynamicsModel::quad_1d();
  Eigen::VectorXd integral;

  Eigen::VectorXd at_ref = m1.equilibrium_state();
  auto u = pid_act(cfg, m1, at_ref, at_ref, 0.02, integral);
  CHECK(u(0) == doctest::Approx(m1.quad_1d_params().m * 9.8).epsilon(1e-12));

  integral.resize(0);
  Eigen::VectorXd below = at_ref;
  below(0) -= 0.2;  // below the reference: climb
  u = pid_act(cfg, m1, below, at_ref, 0.02, integral);
  CHECK(u(0) > m1.quad_1d_params().m * 9.8);
}

TEST_CASE("PID rejects the cart-pole") {
  PidConfig cfg;
  auto m = DynamicsModel::cart_pole();
  Eigen::VectorXd integral;
  CHECK_THROWS_AS(
      pid_act(cfg, m, m.equilibrium_state(), m.equilibrium_state(), 0.02, integral),
      UnsupportedError);
}

TEST_CASE("PID tracks a circle on the 2D quadrotor") {
  auto m = DynamicsModel::quad_2d();
  envs::TrajectoryConfig tc;
  tc.shape = envs::TrajShape::Circle;
  tc.scale = 0.3;
  tc.period = 6.0;
  tc.z_offset = 0.0;
  const int L = 300;
  auto ref = envs::generate_trajectory(tc, L, 0.02, m);
  envs::TaskSpec task = hover_task(m, L);
  task.kind = envs::TaskKind::Tracking;
  task.x_ref = ref.x_ref;
  task.u_ref = ref.u_ref;

  PidController ctl;
  ctl.episode_init(reset_info(m, task, ref.x_ref[0]));
  auto [xs, us] = rollout(m, ctl, task, ref.x_ref[0], 0.02, 20);
  double sq = 0.0;
  for (int i = 0; i <= L; ++i) {
    Eigen::Vector2d e(xs[i](0) - task.x_ref_at(i)(0), xs[i](2) - task.x_ref_at(i)(2));
    CHECK(std::isfinite(e.squaredNorm()));
    sq += e.squaredNorm();
  }
  CHECK(std::sqrt(sq / (L + 1)) < 0.2);
}

TEST_CASE("unconstrained linear MPC with DARE terminal cost equals discrete LQR") {
  for (auto m : {DynamicsModel::cart_pole(), DynamicsModel::quad_1d(),
                 DynamicsModel::quad_2d()}) {
    auto task = hover_task(m, 200);
    MpcProblem prob;
    prob.prior = m;
    prob.task = task;
    prob.dt = 0.02;
    MpcConfig cfg;
    cfg.horizon = 25;
    cfg.P_f = mpc_terminal_weight(prob);

    auto policy = lqr_synthesize(m, task, prob.dt, LqrMode::Discrete);
    for (int trial = 0; trial < 3; ++trial) {
      Eigen::VectorXd dx = Eigen::VectorXd::Zero(m.nx());
      dx(trial % m.nx()) = 0.1 * (trial + 1);
      Eigen::VectorXd x = m.equilibrium_state() + dx;
      auto sol = mpc_solve(cfg, prob, x, 0);
      Eigen::VectorXd u_lqr =
          task.u_ref_at(0) - policy.K * (x - task.x_ref_at(0));
      CHECK((sol.u0 - u_lqr).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
}

TEST_CASE("MPC at the reference returns the reference input") {
  auto m = DynamicsModel::quad_1d();
  auto task = hover_task(m, 100);
  MpcProblem prob;
  prob.prior = m;
  prob.task = task;
  for (auto mode : {MpcMode::Linear, MpcMode::Nonlinear}) {
    MpcConfig cfg;
    cfg.mode = mode;
    auto sol = mpc_solve(cfg, prob, m.equilibrium_state(), 0);
    CHECK((sol.u0 - task.u_ref_at(0)).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("nonlinear MPC coincides with linear MPC on linear dynamics") {
  auto m = DynamicsModel::quad_1d();
  auto task = hover_task(m, 100);
  MpcProblem prob;
  prob.prior = m;
  prob.task = task;
  Eigen::VectorXd x(2);
  x << 0.3, -0.1;
  MpcConfig lin;
  MpcConfig nl;
  nl.mode = MpcMode::Nonlinear;
  auto a = mpc_solve(lin, prob, x, 0);
  auto b = mpc_solve(nl, prob, x, 0);
  CHECK((a.u0 - b.u0).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("warm-started consecutive MPC solves agree on overlapping segments") {
  auto m = DynamicsModel::quad_1d();
  auto task = hover_task(m, 100);
  Eigen::VectorXd x0(2);
  x0 << 0.2, 0.0;

  MpcConfig cfg;
  MpcController ctl(cfg);
  ctl.episode_init(reset_info(m, task, x0));

  Eigen::VectorXd x = x0;
  Eigen::VectorXd u = ctl.act(x, 0);
  auto prev = ctl.last_solution();
  x = dynamics::rk4_substeps(m, x, u, 0.02, 20);
  ctl.act(x, 1);
  auto next = ctl.last_solution();
  for (int i = 0; i + 1 < cfg.horizon; ++i)
    CHECK((next.u_pred[i] - prev.u_pred[i + 1]).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("MPC respects a state bound the reference ignores") {
  auto m = DynamicsModel::quad_1d();
  const int L = 150;
  auto task = hover_task(m, L);
  task.kind = envs::TaskKind::Tracking;
  Eigen::VectorXd target(2);
  target << 0.3, 0.0;  // beyond the 0.1 bound
  task.x_ref.assign(L + 1, target);

  envs::EnvConfig ec;
  ec.model = m;
  ec.task = task;
  Eigen::VectorXd lo(1), hi(1);
  lo << -0.1;
  hi << 0.1;
  ec.constraint_set.items.push_back(
      constraints::ConstraintSpec::bound(constraints::ConstraintTarget::State, {0}, lo, hi));
  envs::Environment env(ec);

  MpcController ctl;
  auto [obs, info] = env.reset(0);
  ctl.episode_init(info);
  bool violated = false;
  double peak = -1.0;
  for (int i = 0; i < L; ++i) {
    auto res = env.step(ctl.act(obs, i));
    obs = res.obs;
    violated = violated || res.info.violation;
    peak = std::max(peak, res.info.true_state(0));
    for (const auto& xp : ctl.last_solution().x_pred)
      CHECK(xp(0) <= 0.1 + 1e-6);
    if (res.done) break;
  }
  CHECK(!violated);
  CHECK(peak > 0.05);  // the bound is active, not just never approached
}

TEST_CASE("MPC with a zero residual model is identical to plain MPC") {
  struct ZeroResidual : ResidualModel {
    void predict(const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::VectorXd& mean,
                 Eigen::VectorXd& var) const override {
      mean = Eigen::VectorXd::Zero(x.size());
      var = Eigen::VectorXd::Zero(x.size());
    }
  };
  auto m = DynamicsModel::quad_1d();
  auto task = hover_task(m, 100);
  MpcProblem prob;
  prob.prior = m;
  prob.task = task;
  MpcConfig cfg;
  cfg.mode = MpcMode::Nonlinear;
  Eigen::VectorXd x(2);
  x << 0.25, 0.05;
  ZeroResidual zero;
  auto plain = mpc_solve(cfg, prob, x, 0);
  auto with = mpc_solve(cfg, prob, x, 0, nullptr, nullptr, &zero);
  CHECK(plain.u0 == with.u0);
}

TEST_CASE("controllers are deterministic") {
  auto m = DynamicsModel::cart_pole();
  auto task = hover_task(m, 100);
  Eigen::VectorXd x0(4);
  x0 << 0.1, 0.0, 0.08, 0.0;
  MpcProblem prob;
  prob.prior = m;
  prob.task = task;
  MpcConfig cfg;
  cfg.mode = MpcMode::Nonlinear;
  auto a = mpc_solve(cfg, prob, x0, 3);
  auto b = mpc_solve(cfg, prob, x0, 3);
  CHECK(a.u0 == b.u0);

  auto sa = ilqr_solve(m, task, x0, 0.02);
  auto sb = ilqr_solve(m, task, x0, 0.02);
  CHECK(sa.final_cost == sb.final_cost);
  CHECK(sa.u_nom[0] == sb.u_nom[0]);
}
