#include "safectl/control/mpc.hpp"

#include <cmath>
#include <limits>

#include "safectl/dynamics/integrator.hpp"
#include "safectl/errors.hpp"
#include "safectl/numopt/discretize.hpp"
#include "safectl/numopt/riccati.hpp"

namespace safectl::control {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct StageRows {
  Eigen::MatrixXd G;               // rows x (nx + nu), from as_linear_rows
  Eigen::VectorXd h;
  std::vector<bool> slack_eligible;  // per row: item target is not Input
};

std::vector<bool> slack_mask(const constraints::ConstraintSet& set) {
  std::vector<bool> mask;
  for (const auto& item : set.items) {
    const bool eligible = item.target != constraints::ConstraintTarget::Input;
    for (int r = 0; r < item.num_rows(); ++r) mask.push_back(eligible);
  }
  return mask;
}

}  // namespace

Eigen::MatrixXd mpc_terminal_weight(const MpcProblem& prob) {
  Eigen::MatrixXd A, B;
  prob.prior.jacobians(prob.prior.equilibrium_state(), prob.prior.equilibrium_input(), A, B);
  auto zoh = numopt::zoh_discretize(A, B, prob.dt);
  return numopt::solve_dare(zoh.Ad, zoh.Bd, prob.task.Q, prob.task.R).P;
}

MpcSolution mpc_solve(const MpcConfig& cfg, const MpcProblem& prob,
                      const Eigen::VectorXd& x_now, int step,
                      const std::vector<Eigen::VectorXd>* warm_x,
                      const std::vector<Eigen::VectorXd>* warm_u,
                      const ResidualModel* residual) {
  if (!x_now.allFinite()) throw NonFiniteError("mpc: non-finite current state");
  const int H = cfg.horizon;
  const int nx = prob.prior.nx();
  const int nu = prob.prior.nu();
  const int n = H * (nx + nu);
  const auto& task = prob.task;

  const Eigen::MatrixXd P_f = cfg.P_f.size() > 0 ? cfg.P_f : mpc_terminal_weight(prob);

  auto xvar = [&](int i) { return (i - 1) * nx; };          // x_i, i = 1..H
  auto uvar = [&](int i) { return H * nx + i * nu; };       // u_i, i = 0..H-1

  // Linearization trajectory: the reference for Linear mode, the SQP iterate
  // for Nonlinear mode (warm start or a reference-input rollout).
  std::vector<Eigen::VectorXd> xbar(H + 1), ubar(H);
  if (cfg.mode == MpcMode::Linear) {
    for (int i = 0; i <= H; ++i) xbar[i] = task.x_ref_at(step + i);
    for (int i = 0; i < H; ++i) ubar[i] = task.u_ref_at(step + i);
  } else {
    xbar[0] = x_now;
    if (warm_x && warm_u && static_cast<int>(warm_x->size()) == H &&
        static_cast<int>(warm_u->size()) == H) {
      for (int i = 0; i < H; ++i) {
        xbar[i + 1] = (*warm_x)[i];
        ubar[i] = (*warm_u)[i];
      }
    } else {
      for (int i = 0; i < H; ++i) {
        ubar[i] = task.u_ref_at(step + i);
        try {
          xbar[i + 1] = dynamics::rk4_substeps(prob.prior, xbar[i], ubar[i], prob.dt,
                                               prob.physics_substeps);
        } catch (const NonFiniteError&) {
          // Divergent cold rollout: freeze the remainder at the last finite state.
          xbar[i + 1] = xbar[i];
        }
      }
    }
  }

  const bool have_input_bounds =
      (prob.u_lower.size() == nu && prob.u_upper.size() == nu) &&
      (prob.u_lower.array().isFinite().any() || prob.u_upper.array().isFinite().any());

  const int sqp_iters = cfg.mode == MpcMode::Linear ? 1 : std::max(1, cfg.sqp_iters);

  MpcSolution sol;
  std::optional<Eigen::VectorXd> warm_z;

  for (int it = 0; it < sqp_iters; ++it) {
    if (cfg.mode == MpcMode::Nonlinear) xbar[0] = x_now;

    // Stage linearizations and residual corrections along the iterate.
    std::vector<dynamics::DiscreteLinearization> lin(H);
    std::vector<Eigen::VectorXd> mu(H, Eigen::VectorXd::Zero(nx));
    Eigen::VectorXd var_accum = Eigen::VectorXd::Zero(nx);
    std::vector<Eigen::VectorXd> sigma(H);  // accumulated std after i+1 steps
    for (int i = 0; i < H; ++i) {
      lin[i] = dynamics::linearize_discrete(prob.prior, xbar[i], ubar[i], prob.dt);
      if (residual) {
        Eigen::VectorXd var;
        residual->predict(xbar[i], ubar[i], mu[i], var);
        var_accum += var;
      }
      sigma[i] = var_accum.cwiseSqrt();
    }

    // Constraint tightening from the accumulated residual uncertainty.
    std::vector<constraints::ConstraintSet> tightened;
    if (!prob.constraint_set.empty()) {
      std::vector<Eigen::VectorXd> margins(
          H, Eigen::VectorXd::Zero(static_cast<int>(prob.constraint_set.items.size())));
      for (int i = 0; i < H; ++i) {
        for (size_t j = 0; j < prob.constraint_set.items.size(); ++j) {
          const auto& item = prob.constraint_set.items[j];
          if (item.target == constraints::ConstraintTarget::Input) continue;
          double worst = 0.0;
          if (residual) {
            for (int ch : item.selector)
              if (ch < nx) worst = std::max(worst, sigma[i](ch));
          }
          margins[i](static_cast<int>(j)) = cfg.constraint_margin + cfg.z_score * worst;
        }
      }
      tightened = constraints::tighten(prob.constraint_set, margins);
    }

    // Stage constraint rows at (x_i, u_{i-1}) for i = 1..H.
    std::vector<StageRows> stage(H);
    int n_cons_rows = 0;
    for (int i = 0; i < H; ++i) {
      if (tightened.empty()) continue;
      auto rows = constraints::as_linear_rows(tightened[i], xbar[i + 1], ubar[i]);
      stage[i].G = rows.G;
      stage[i].h = rows.h;
      stage[i].slack_eligible = slack_mask(tightened[i]);
      n_cons_rows += static_cast<int>(rows.h.size());
    }

    const int n_dyn = H * nx;
    const int n_bnd = have_input_bounds ? H * nu : 0;
    const int m = n_dyn + n_bnd + n_cons_rows;

    numopt::QpProblem qp;
    qp.H = Eigen::MatrixXd::Zero(n, n);
    qp.g = Eigen::VectorXd::Zero(n);
    qp.A = Eigen::MatrixXd::Zero(m, n);
    qp.lb = Eigen::VectorXd::Constant(m, -kInf);
    qp.ub = Eigen::VectorXd::Constant(m, kInf);

    for (int i = 1; i <= H; ++i) {
      const Eigen::MatrixXd& W = i == H ? P_f : task.Q;
      qp.H.block(xvar(i), xvar(i), nx, nx) = W;
      qp.g.segment(xvar(i), nx) = -W * task.x_ref_at(step + i);
    }
    for (int i = 0; i < H; ++i) {
      qp.H.block(uvar(i), uvar(i), nu, nu) = task.R;
      qp.g.segment(uvar(i), nu) = -task.R * task.u_ref_at(step + i);
    }

    // Dynamics equalities: x_{i+1} - Ad x_i - Bd u_i = c_i.
    for (int i = 0; i < H; ++i) {
      const int row = i * nx;
      Eigen::VectorXd c =
          xbar[i] - lin[i].Ad * xbar[i] - lin[i].Bd * ubar[i] + lin[i].offset + mu[i];
      qp.A.block(row, xvar(i + 1), nx, nx) = Eigen::MatrixXd::Identity(nx, nx);
      if (i == 0) {
        c += lin[i].Ad * x_now;  // x_0 is not a variable; fold it into the constant
      } else {
        qp.A.block(row, xvar(i), nx, nx) = -lin[i].Ad;
      }
      qp.A.block(row, uvar(i), nx, nu) = -lin[i].Bd;
      qp.lb.segment(row, nx) = c;
      qp.ub.segment(row, nx) = c;
    }

    if (have_input_bounds) {
      for (int i = 0; i < H; ++i) {
        const int row = n_dyn + i * nu;
        qp.A.block(row, uvar(i), nu, nu) = Eigen::MatrixXd::Identity(nu, nu);
        qp.lb.segment(row, nu) = prob.u_lower;
        qp.ub.segment(row, nu) = prob.u_upper;
      }
    }

    std::vector<bool> row_slack(m, false);
    {
      int row = n_dyn + n_bnd;
      for (int i = 0; i < H; ++i) {
        const int r = static_cast<int>(stage[i].h.size());
        if (r == 0) continue;
        qp.A.block(row, xvar(i + 1), r, nx) = stage[i].G.leftCols(nx);
        qp.A.block(row, uvar(i), r, nu) = stage[i].G.rightCols(nu);
        qp.ub.segment(row, r) = stage[i].h;
        for (int k = 0; k < r; ++k) row_slack[row + k] = stage[i].slack_eligible[k];
        row += r;
      }
    }

    auto qsol = numopt::solve_qp(qp, cfg.warm_start ? warm_z : std::nullopt);
    sol.qp_iterations += qsol.iterations;
    sol.status = qsol.status;
    sol.slack_used = false;
    sol.max_slack = 0.0;

    if (qsol.status == numopt::QpStatus::Infeasible) {
      // Relax the state-constraint rows with quadratically penalized slacks;
      // dynamics and input bounds stay hard.
      int m_s = 0;
      for (bool e : row_slack) m_s += e ? 1 : 0;
      numopt::QpProblem relaxed;
      relaxed.H = Eigen::MatrixXd::Zero(n + m_s, n + m_s);
      relaxed.H.topLeftCorner(n, n) = qp.H;
      // Exact penalty: linear slack cost dominating the constraint duals, so
      // slack stays zero unless the problem is genuinely infeasible.
      relaxed.H.bottomRightCorner(m_s, m_s) = Eigen::MatrixXd::Identity(m_s, m_s);
      relaxed.g = Eigen::VectorXd::Constant(n + m_s, cfg.slack_penalty);
      relaxed.g.head(n) = qp.g;
      relaxed.A = Eigen::MatrixXd::Zero(m + m_s, n + m_s);
      relaxed.A.topLeftCorner(m, n) = qp.A;
      relaxed.lb = Eigen::VectorXd::Constant(m + m_s, -kInf);
      relaxed.ub = Eigen::VectorXd::Constant(m + m_s, kInf);
      relaxed.lb.head(m) = qp.lb;
      relaxed.ub.head(m) = qp.ub;
      int k = 0;
      for (int r = 0; r < m; ++r) {
        if (!row_slack[r]) continue;
        relaxed.A(r, n + k) = -1.0;       // G z - s <= h
        relaxed.A(m + k, n + k) = 1.0;    // s >= 0
        relaxed.lb(m + k) = 0.0;
        ++k;
      }
      std::optional<Eigen::VectorXd> relaxed_warm;
      if (cfg.warm_start && warm_z) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(n + m_s);
        w.head(n) = *warm_z;
        relaxed_warm = w;
      }
      qsol = numopt::solve_qp(relaxed, relaxed_warm);
      sol.qp_iterations += qsol.iterations;
      sol.status = qsol.status;
      sol.slack_used = true;
      if (m_s > 0) sol.max_slack = qsol.z.tail(m_s).cwiseMax(0.0).maxCoeff();
    }

    Eigen::VectorXd z = qsol.z.head(n);
    if (!z.allFinite()) throw NonFiniteError("mpc: QP returned non-finite iterate");
    warm_z = z;

    sol.x_pred.assign(H, Eigen::VectorXd());
    sol.u_pred.assign(H, Eigen::VectorXd());
    for (int i = 1; i <= H; ++i) sol.x_pred[i - 1] = z.segment(xvar(i), nx);
    for (int i = 0; i < H; ++i) sol.u_pred[i] = z.segment(uvar(i), nu);

    if (cfg.mode == MpcMode::Nonlinear) {
      for (int i = 0; i < H; ++i) {
        xbar[i + 1] += cfg.sqp_damping * (sol.x_pred[i] - xbar[i + 1]);
        ubar[i] += cfg.sqp_damping * (sol.u_pred[i] - ubar[i]);
      }
    }
  }

  sol.u0 = sol.u_pred[0];
  return sol;
}

void MpcController::episode_init(const envs::ResetInfo& info) {
  prob_.prior = info.prior_model;
  prob_.task = info.task;
  prob_.constraint_set = info.constraint_set;
  prob_.u_lower = info.u_lower;
  prob_.u_upper = info.u_upper;
  prob_.dt = info.control_dt;
  prob_.physics_substeps = info.physics_substeps;
  if (cfg_.P_f.size() == 0) cfg_.P_f = mpc_terminal_weight(prob_);
  have_warm_ = false;
  last_ = MpcSolution{};
}

Eigen::VectorXd MpcController::act(const Eigen::VectorXd& obs, int step) {
  const std::vector<Eigen::VectorXd>* wx = nullptr;
  const std::vector<Eigen::VectorXd>* wu = nullptr;
  std::vector<Eigen::VectorXd> sx, su;
  if (cfg_.warm_start && have_warm_) {
    // Shift the previous prediction by one step, repeating the tail.
    sx.assign(last_.x_pred.begin() + 1, last_.x_pred.end());
    sx.push_back(last_.x_pred.back());
    su.assign(last_.u_pred.begin() + 1, last_.u_pred.end());
    su.push_back(last_.u_pred.back());
    wx = &sx;
    wu = &su;
  }
  last_ = mpc_solve(cfg_, prob_, obs, step, wx, wu, residual_.get());
  have_warm_ = true;
  return last_.u0;
}

}  // namespace safectl::control
