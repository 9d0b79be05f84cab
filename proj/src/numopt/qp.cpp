#include "safectl/numopt/qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>
#include <limits>

#include "safectl/errors.hpp"

namespace safectl::numopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_problem(const QpProblem& p) {
  const int n = p.num_vars();
  const int m = p.num_rows();
  if (p.H.rows() != n || p.H.cols() != n) throw DimensionError("QpProblem: H size mismatch");
  if (m > 0 && (p.A.rows() != m || p.A.cols() != n))
    throw DimensionError("QpProblem: A size mismatch");
  if (p.ub.size() != m) throw DimensionError("QpProblem: bound size mismatch");
  for (int i = 0; i < m; ++i) {
    if (p.lb(i) > p.ub(i)) throw DimensionError("QpProblem: lb > ub");
  }
}

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

// Exact solve when no inequality rows are present: the KKT system is linear.
std::optional<QpSolution> try_direct_solve(const QpProblem& p) {
  const int n = p.num_vars();
  const int m = p.num_rows();
  bool all_equality = true;
  for (int i = 0; i < m; ++i) {
    if (p.lb(i) != p.ub(i)) {
      all_equality = false;
      break;
    }
  }
  if (!all_equality) return std::nullopt;

  QpSolution sol;
  if (m == 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(p.H);
    if (ldlt.info() != Eigen::Success) return std::nullopt;
    sol.z = ldlt.solve(-p.g);
    sol.dual = Eigen::VectorXd::Zero(0);
  } else {
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = p.H;
    kkt.topRightCorner(n, m) = p.A.transpose();
    kkt.bottomLeftCorner(m, n) = p.A;
    Eigen::VectorXd rhs(n + m);
    rhs.head(n) = -p.g;
    rhs.tail(m) = p.lb;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) return std::nullopt;
    Eigen::VectorXd zy = lu.solve(rhs);
    sol.z = zy.head(n);
    sol.dual = zy.tail(m);
  }
  sol.primal_res = m == 0 ? 0.0 : inf_norm(p.A * sol.z - p.lb);
  Eigen::VectorXd stat = p.H * sol.z + p.g;
  if (m > 0) stat += p.A.transpose() * sol.dual;
  sol.dual_res = inf_norm(stat);
  sol.iterations = 0;
  sol.status = (sol.primal_res < 1e-8 && sol.dual_res < 1e-6) ? QpStatus::Solved : QpStatus::MaxIter;
  if (sol.status == QpStatus::Solved) return sol;
  return std::nullopt;
}

}  // namespace

QpSolution solve_qp(const QpProblem& prob, const std::optional<Eigen::VectorXd>& warm_start,
                    const QpSettings& st) {
  check_problem(prob);
  const int n = prob.num_vars();
  const int m = prob.num_rows();

  if (auto direct = try_direct_solve(prob)) return *direct;

  // Per-row penalty: equality rows get a stiffer rho.
  double rho_bar = st.rho;
  auto make_rho = [&](double base) {
    Eigen::VectorXd r(m);
    for (int i = 0; i < m; ++i) r(i) = (prob.lb(i) == prob.ub(i)) ? base * 1e3 : base;
    return r;
  };
  Eigen::VectorXd rho = make_rho(rho_bar);

  Eigen::VectorXd x = warm_start && warm_start->size() == n ? *warm_start
                                                            : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd zc = (prob.A * x).cwiseMax(prob.lb).cwiseMin(prob.ub);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);

  auto factor = [&](const Eigen::VectorXd& rho_vec) {
    Eigen::MatrixXd K = prob.H;
    K.diagonal().array() += st.sigma;
    K += prob.A.transpose() * rho_vec.asDiagonal() * prob.A;
    return Eigen::LDLT<Eigen::MatrixXd>(K);
  };
  Eigen::LDLT<Eigen::MatrixXd> kkt = factor(rho);

  QpSolution sol;
  sol.status = QpStatus::MaxIter;

  Eigen::VectorXd y_prev_check = y;
  const int check_every = 25;

  int iter = 0;
  for (iter = 1; iter <= st.max_iter; ++iter) {
    Eigen::VectorXd rhs =
        st.sigma * x - prob.g + prob.A.transpose() * (rho.cwiseProduct(zc) - y);
    Eigen::VectorXd x_tilde = kkt.solve(rhs);
    Eigen::VectorXd z_tilde = prob.A * x_tilde;

    Eigen::VectorXd x_next = st.alpha * x_tilde + (1.0 - st.alpha) * x;
    Eigen::VectorXd z_relax = st.alpha * z_tilde + (1.0 - st.alpha) * zc;
    Eigen::VectorXd z_next =
        (z_relax + y.cwiseQuotient(rho)).cwiseMax(prob.lb).cwiseMin(prob.ub);
    y += rho.cwiseProduct(z_relax - z_next);
    x = x_next;
    zc = z_next;

    if (iter % check_every != 0 && iter != st.max_iter) continue;

    Eigen::VectorXd Ax = prob.A * x;
    Eigen::VectorXd Hx = prob.H * x;
    Eigen::VectorXd Aty = prob.A.transpose() * y;
    double r_prim = inf_norm(Ax - zc);
    double r_dual = inf_norm(Hx + prob.g + Aty);
    double eps_prim = st.eps_abs + st.eps_rel * std::max(inf_norm(Ax), inf_norm(zc));
    double eps_dual =
        st.eps_abs +
        st.eps_rel * std::max({inf_norm(Hx), inf_norm(Aty), inf_norm(prob.g)});

    if (r_prim <= eps_prim && r_dual <= eps_dual) {
      sol.status = QpStatus::Solved;
      sol.primal_res = r_prim;
      sol.dual_res = r_dual;
      break;
    }

    // Primal infeasibility certificate from the dual increment.
    Eigen::VectorXd dy = y - y_prev_check;
    double dy_norm = inf_norm(dy);
    if (dy_norm > 1e-12) {
      double aty_dy = inf_norm(prob.A.transpose() * dy);
      double support = 0.0;
      bool bounded_support = true;
      for (int i = 0; i < m; ++i) {
        if (dy(i) > 0) {
          if (prob.ub(i) == kInf) { bounded_support = false; break; }
          support += prob.ub(i) * dy(i);
        } else if (dy(i) < 0) {
          if (prob.lb(i) == -kInf) { bounded_support = false; break; }
          support += prob.lb(i) * dy(i);
        }
      }
      if (bounded_support && aty_dy <= st.eps_prim_inf * dy_norm &&
          support <= -st.eps_prim_inf * dy_norm) {
        sol.status = QpStatus::Infeasible;
        sol.primal_res = r_prim;
        sol.dual_res = r_dual;
        break;
      }
    }
    y_prev_check = y;

    if (st.adaptive_rho && iter % (2 * check_every) == 0) {
      double prim_scale = std::max({inf_norm(Ax), inf_norm(zc), 1e-10});
      double dual_scale = std::max({inf_norm(Hx), inf_norm(Aty), inf_norm(prob.g), 1e-10});
      double ratio = std::sqrt((r_prim / prim_scale) / std::max(r_dual / dual_scale, 1e-16));
      double rho_new = std::clamp(rho_bar * ratio, 1e-6, 1e6);
      if (rho_new > 5.0 * rho_bar || rho_new < rho_bar / 5.0) {
        rho_bar = rho_new;
        rho = make_rho(rho_bar);
        kkt = factor(rho);
      }
    }

    if (iter == st.max_iter) {
      sol.primal_res = r_prim;
      sol.dual_res = r_dual;
    }
  }

  sol.z = x;
  sol.dual = y;
  sol.iterations = std::min(iter, st.max_iter);
  return sol;
}

}  // namespace safectl::numopt
