#include "safectl/safefilters/mpsc.hpp"

#include <limits>

#include "safectl/dynamics/integrator.hpp"
#include "safectl/errors.hpp"
#include "safectl/numopt/qp.hpp"

namespace safectl::safefilters {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void MpscFilter::episode_init(const envs::ResetInfo& info) {
  info_ = info;
  backup_ = info.prior_model.equilibrium_input();
  warm_.reset();
}

MpscFilter::Result MpscFilter::filter(const Eigen::VectorXd& u_proposed,
                                      const Eigen::VectorXd& x, int step) {
  const auto& prior = info_.prior_model;
  const auto& task = info_.task;
  const int H = cfg_.horizon;
  const int nx = prior.nx();
  const int nu = prior.nu();
  const int n = H * (nx + nu);

  auto xvar = [&](int i) { return (i - 1) * nx; };
  auto uvar = [&](int i) { return H * nx + i * nu; };

  // Linearize the prior about the reference along the lookahead window.
  std::vector<dynamics::DiscreteLinearization> lin(H);
  for (int i = 0; i < H; ++i)
    lin[i] = dynamics::linearize_discrete(prior, task.x_ref_at(step + i),
                                          task.u_ref_at(step + i), info_.control_dt);

  // Tightened state-constraint rows at every stage.
  std::vector<constraints::ConstraintSet> tightened;
  if (!info_.constraint_set.empty()) {
    std::vector<Eigen::VectorXd> margins(
        H, Eigen::VectorXd::Zero(static_cast<int>(info_.constraint_set.items.size())));
    for (int i = 0; i < H; ++i)
      for (size_t j = 0; j < info_.constraint_set.items.size(); ++j)
        if (info_.constraint_set.items[j].target != constraints::ConstraintTarget::Input)
          margins[i](static_cast<int>(j)) = cfg_.constraint_margin;
    tightened = constraints::tighten(info_.constraint_set, margins);
  }

  struct Stage {
    Eigen::MatrixXd G;
    Eigen::VectorXd h;
    std::vector<bool> slack_ok;
  };
  std::vector<Stage> stage(H);
  int n_cons = 0;
  for (int i = 0; i < H && !tightened.empty(); ++i) {
    auto rows = constraints::as_linear_rows(tightened[i], task.x_ref_at(step + i + 1),
                                            task.u_ref_at(step + i));
    stage[i].G = rows.G;
    stage[i].h = rows.h;
    for (const auto& item : tightened[i].items) {
      const bool ok = item.target != constraints::ConstraintTarget::Input;
      for (int r = 0; r < item.num_rows(); ++r) stage[i].slack_ok.push_back(ok);
    }
    n_cons += static_cast<int>(rows.h.size());
  }

  const bool have_bounds = info_.u_lower.size() == nu && info_.u_upper.size() == nu;
  const int n_dyn = H * nx;
  const int n_bnd = have_bounds ? H * nu : 0;
  const int n_term = nx;
  const int m = n_dyn + n_bnd + n_cons + n_term;

  numopt::QpProblem qp;
  qp.H = 1e-8 * Eigen::MatrixXd::Identity(n, n);  // keep the QP well posed
  qp.H.block(uvar(0), uvar(0), nu, nu) = Eigen::MatrixXd::Identity(nu, nu);
  qp.g = Eigen::VectorXd::Zero(n);
  qp.g.segment(uvar(0), nu) = -u_proposed;
  qp.A = Eigen::MatrixXd::Zero(m, n);
  qp.lb = Eigen::VectorXd::Constant(m, -kInf);
  qp.ub = Eigen::VectorXd::Constant(m, kInf);

  for (int i = 0; i < H; ++i) {
    const int row = i * nx;
    const Eigen::VectorXd& xb = task.x_ref_at(step + i);
    const Eigen::VectorXd& ub = task.u_ref_at(step + i);
    Eigen::VectorXd c = xb - lin[i].Ad * xb - lin[i].Bd * ub + lin[i].offset;
    qp.A.block(row, xvar(i + 1), nx, nx) = Eigen::MatrixXd::Identity(nx, nx);
    if (i == 0) {
      c += lin[i].Ad * x;
    } else {
      qp.A.block(row, xvar(i), nx, nx) = -lin[i].Ad;
    }
    qp.A.block(row, uvar(i), nx, nu) = -lin[i].Bd;
    qp.lb.segment(row, nx) = c;
    qp.ub.segment(row, nx) = c;
  }

  if (have_bounds) {
    for (int i = 0; i < H; ++i) {
      const int row = n_dyn + i * nu;
      qp.A.block(row, uvar(i), nu, nu) = Eigen::MatrixXd::Identity(nu, nu);
      qp.lb.segment(row, nu) = info_.u_lower;
      qp.ub.segment(row, nu) = info_.u_upper;
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
      for (int k = 0; k < r; ++k) row_slack[row + k] = stage[i].slack_ok[k];
      row += r;
    }
  }

  // Hard terminal box about the reference at the end of the window.
  {
    const int row = n_dyn + n_bnd + n_cons;
    qp.A.block(row, xvar(H), nx, nx) = Eigen::MatrixXd::Identity(nx, nx);
    qp.lb.segment(row, nx) =
        task.x_ref_at(step + H).array() - cfg_.terminal_halfwidth;
    qp.ub.segment(row, nx) =
        task.x_ref_at(step + H).array() + cfg_.terminal_halfwidth;
  }

  Result out;

  // Pass 1: is the proposed input itself certifiable? Pin u_0 and test
  // feasibility so safe inputs pass through without solver round-off.
  {
    numopt::QpProblem pinned = qp;
    pinned.A.conservativeResize(m + nu, n);
    pinned.A.bottomRows(nu).setZero();
    pinned.A.block(m, uvar(0), nu, nu) = Eigen::MatrixXd::Identity(nu, nu);
    pinned.lb.conservativeResize(m + nu);
    pinned.ub.conservativeResize(m + nu);
    pinned.lb.tail(nu) = u_proposed;
    pinned.ub.tail(nu) = u_proposed;
    auto warm = warm_ && warm_->size() == n ? warm_ : std::nullopt;
    auto ps = numopt::solve_qp(pinned, warm);
    if (ps.status == numopt::QpStatus::Solved) {
      out.u_safe = u_proposed;
      out.certified = true;
      out.modified = false;
      backup_ = u_proposed;
      warm_ = ps.z;
      return out;
    }
  }

  // Pass 2: full projection.
  auto warm = warm_ && warm_->size() == n ? warm_ : std::nullopt;
  auto sol = numopt::solve_qp(qp, warm);
  if (sol.status == numopt::QpStatus::Solved) {
    out.u_safe = sol.z.segment(uvar(0), nu);
    out.certified = true;
    out.modified = true;
    backup_ = out.u_safe;
    warm_ = sol.z;
    return out;
  }

  // Pass 3: slack-relaxed state rows; terminal box and input bounds stay hard.
  int m_s = 0;
  for (bool e : row_slack) m_s += e ? 1 : 0;
  numopt::QpProblem relaxed;
  relaxed.H = Eigen::MatrixXd::Zero(n + m_s, n + m_s);
  relaxed.H.topLeftCorner(n, n) = qp.H;
  // Exact penalty: the linear term dominates any active-constraint dual, so
  // slacks stay at zero whenever the problem is feasible and otherwise track
  // the minimal violation.
  relaxed.H.bottomRightCorner(m_s, m_s) = Eigen::MatrixXd::Identity(m_s, m_s);
  relaxed.g = Eigen::VectorXd::Constant(n + m_s, cfg_.slack_penalty);
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
    relaxed.A(r, n + k) = -1.0;
    relaxed.A(m + k, n + k) = 1.0;
    relaxed.lb(m + k) = 0.0;
    ++k;
  }
  auto rs = numopt::solve_qp(relaxed);
  if (rs.status != numopt::QpStatus::Infeasible && rs.z.head(n).allFinite()) {
    out.u_safe = rs.z.segment(uvar(0), nu);
    out.certified = false;
    out.modified = true;
    if (m_s > 0) out.max_slack = rs.z.tail(m_s).cwiseMax(0.0).maxCoeff();
    warm_.reset();
    return out;
  }

  // Even the relaxed problem failed (e.g. unreachable terminal set): fall
  // back to the last certified input.
  out.u_safe = backup_;
  out.certified = false;
  out.modified = true;
  warm_.reset();
  return out;
}

}  // namespace safectl::safefilters
