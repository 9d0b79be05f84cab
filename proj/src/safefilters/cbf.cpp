#include "safectl/safefilters/cbf.hpp"

#include <limits>

#include "safectl/errors.hpp"
#include "safectl/numopt/qp.hpp"

namespace safectl::safefilters {

namespace {

Eigen::VectorXd select(const CbfSpec& spec, const Eigen::VectorXd& x) {
  Eigen::VectorXd v(spec.selector.size());
  for (size_t i = 0; i < spec.selector.size(); ++i) v(i) = x(spec.selector[i]);
  return v;
}

}  // namespace

double cbf_value(const CbfSpec& spec, const Eigen::VectorXd& x) {
  Eigen::VectorXd d = select(spec, x) - spec.center;
  return spec.level - d.dot(spec.P * d);
}

Eigen::VectorXd cbf_gradient(const CbfSpec& spec, const Eigen::VectorXd& x) {
  Eigen::VectorXd d = select(spec, x) - spec.center;
  Eigen::VectorXd gv = -2.0 * (spec.P * d);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  for (size_t i = 0; i < spec.selector.size(); ++i) g(spec.selector[i]) = gv(i);
  return g;
}

CbfResult cbf_filter(const CbfSpec& spec, const dynamics::DynamicsModel& prior,
                     const Eigen::VectorXd& u_proposed, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u_lower, const Eigen::VectorXd& u_upper) {
  const int nu = prior.nu();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Exact control-affine split: the models are affine in u, so columns of B
  // follow from unit-input differences.
  Eigen::VectorXd f0 = prior.dynamics(x, Eigen::VectorXd::Zero(nu));
  Eigen::MatrixXd B(x.size(), nu);
  for (int j = 0; j < nu; ++j)
    B.col(j) = prior.dynamics(x, Eigen::VectorXd::Unit(nu, j)) - f0;

  const double h = cbf_value(spec, x);
  Eigen::VectorXd grad = cbf_gradient(spec, x);
  // Row: grad'(f0 + B u) >= -gamma (h - margin)
  Eigen::RowVectorXd a = grad.transpose() * B;
  const double rhs = -spec.gamma * (h - spec.margin) - grad.dot(f0);

  // An already-feasible proposal is the exact minimizer: pass it through
  // untouched instead of accepting solver round-off.
  {
    const bool row_ok = a.dot(u_proposed) >= rhs;
    const bool lb_ok = u_lower.size() != nu || (u_proposed.array() >= u_lower.array()).all();
    const bool ub_ok = u_upper.size() != nu || (u_proposed.array() <= u_upper.array()).all();
    if (row_ok && lb_ok && ub_ok) {
      CbfResult out;
      out.u_safe = u_proposed;
      out.modified = false;
      return out;
    }
  }

  numopt::QpProblem qp;
  qp.H = Eigen::MatrixXd::Identity(nu, nu);
  qp.g = -u_proposed;
  qp.A = Eigen::MatrixXd::Zero(1 + nu, nu);
  qp.A.row(0) = a;
  qp.A.bottomRows(nu) = Eigen::MatrixXd::Identity(nu, nu);
  qp.lb = Eigen::VectorXd::Constant(1 + nu, -kInf);
  qp.ub = Eigen::VectorXd::Constant(1 + nu, kInf);
  qp.lb(0) = rhs;
  if (u_lower.size() == nu) qp.lb.tail(nu) = u_lower;
  if (u_upper.size() == nu) qp.ub.tail(nu) = u_upper;

  auto sol = numopt::solve_qp(qp, u_proposed);

  CbfResult out;
  if (sol.status == numopt::QpStatus::Infeasible) {
    // Relax only the barrier row: min ||u - up||^2 + penalty s^2, s >= 0.
    numopt::QpProblem rq;
    rq.H = Eigen::MatrixXd::Identity(nu + 1, nu + 1);
    rq.g = Eigen::VectorXd::Zero(nu + 1);
    rq.g.head(nu) = -u_proposed;
    rq.g(nu) = spec.slack_penalty;  // exact penalty on the barrier violation
    rq.A = Eigen::MatrixXd::Zero(2 + nu, nu + 1);
    rq.A.block(0, 0, 1, nu) = a;
    rq.A(0, nu) = 1.0;  // a'u + s >= rhs
    rq.A(1, nu) = 1.0;  // s >= 0
    rq.A.block(2, 0, nu, nu) = Eigen::MatrixXd::Identity(nu, nu);
    rq.lb = Eigen::VectorXd::Constant(2 + nu, -kInf);
    rq.ub = Eigen::VectorXd::Constant(2 + nu, kInf);
    rq.lb(0) = rhs;
    rq.lb(1) = 0.0;
    if (u_lower.size() == nu) rq.lb.tail(nu) = u_lower;
    if (u_upper.size() == nu) rq.ub.tail(nu) = u_upper;
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(nu + 1);
    warm.head(nu) = u_proposed;
    auto rs = numopt::solve_qp(rq, warm);
    out.u_safe = rs.z.head(nu);
    out.slack = std::max(rs.z(nu), 0.0);
  } else {
    out.u_safe = sol.z;
  }
  if (!out.u_safe.allFinite()) throw NonFiniteError("cbf: QP returned non-finite input");
  out.modified = (out.u_safe - u_proposed).cwiseAbs().maxCoeff() > 1e-9;
  return out;
}

}  // namespace safectl::safefilters
