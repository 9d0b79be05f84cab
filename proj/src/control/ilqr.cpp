#include "safectl/control/ilqr.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "safectl/dynamics/integrator.hpp"
#include "safectl/errors.hpp"

namespace safectl::control {

namespace {

struct Rollout {
  std::vector<Eigen::VectorXd> x, u;
  double cost = 0.0;
};

double trajectory_cost(const envs::TaskSpec& task, const std::vector<Eigen::VectorXd>& xs,
                       const std::vector<Eigen::VectorXd>& us) {
  double c = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    Eigen::VectorXd dx = xs[i] - task.x_ref_at(static_cast<int>(i));
    c += 0.5 * dx.dot(task.Q * dx);
  }
  for (size_t i = 0; i < us.size(); ++i) {
    Eigen::VectorXd du = us[i] - task.u_ref_at(static_cast<int>(i));
    c += 0.5 * du.dot(task.R * du);
  }
  return c;
}

}  // namespace

IlqrSolution ilqr_solve(const dynamics::DynamicsModel& prior, const envs::TaskSpec& task,
                        const Eigen::VectorXd& x0, double dt, const IlqrSettings& st) {
  const int L = task.length;
  const int nx = prior.nx();
  const int nu = prior.nu();

  auto f_d = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return dynamics::rk4_substeps(prior, x, u, dt, st.physics_substeps);
  };

  // Initial nominal: hold the reference inputs.
  Rollout nom;
  nom.x.assign(L + 1, Eigen::VectorXd());
  nom.u.assign(L, Eigen::VectorXd());
  nom.x[0] = x0;
  for (int i = 0; i < L; ++i) {
    nom.u[i] = task.u_ref_at(i);
    nom.x[i + 1] = f_d(nom.x[i], nom.u[i]);
  }
  nom.cost = trajectory_cost(task, nom.x, nom.u);

  IlqrSolution sol;
  sol.cost_trace.push_back(nom.cost);
  sol.K.assign(L, Eigen::MatrixXd::Zero(nu, nx));
  sol.k.assign(L, Eigen::VectorXd::Zero(nu));

  double reg = st.reg_init;
  bool converged = false;

  for (int iter = 0; iter < st.max_iter && !converged; ++iter) {
    // Backward pass; bumps the regularization until Quu stays PD.
    std::vector<Eigen::MatrixXd> K(L);
    std::vector<Eigen::VectorXd> kff(L);
    double dv1 = 0.0, dv2 = 0.0;
    bool backward_ok = false;
    while (!backward_ok) {
      dv1 = dv2 = 0.0;
      Eigen::VectorXd Vx = task.Q * (nom.x[L] - task.x_ref_at(L));
      Eigen::MatrixXd Vxx = task.Q;
      backward_ok = true;
      for (int i = L - 1; i >= 0; --i) {
        auto lin = dynamics::linearize_discrete(prior, nom.x[i], nom.u[i], dt);
        const Eigen::MatrixXd& A = lin.Ad;
        const Eigen::MatrixXd& B = lin.Bd;
        Eigen::VectorXd dx = nom.x[i] - task.x_ref_at(i);
        Eigen::VectorXd du = nom.u[i] - task.u_ref_at(i);

        Eigen::VectorXd Qx = task.Q * dx + A.transpose() * Vx;
        Eigen::VectorXd Qu = task.R * du + B.transpose() * Vx;
        Eigen::MatrixXd Qxx = task.Q + A.transpose() * Vxx * A;
        Eigen::MatrixXd Qux = B.transpose() * Vxx * A;
        Eigen::MatrixXd Quu = task.R + B.transpose() * Vxx * B;

        // State-space LM: regularize through the value Hessian.
        Eigen::MatrixXd Vxx_reg = Vxx + reg * Eigen::MatrixXd::Identity(nx, nx);
        Eigen::MatrixXd Quu_reg = task.R + B.transpose() * Vxx_reg * B;
        Eigen::MatrixXd Qux_reg = B.transpose() * Vxx_reg * A;

        Eigen::LLT<Eigen::MatrixXd> llt(Quu_reg);
        if (llt.info() != Eigen::Success) {
          reg *= st.reg_factor;
          if (reg > st.reg_max) throw Error("ilqr: diverged (regularization exhausted)");
          backward_ok = false;
          break;
        }
        kff[i] = -llt.solve(Qu);
        K[i] = -llt.solve(Qux_reg);

        dv1 += kff[i].dot(Qu);
        dv2 += kff[i].dot(Quu * kff[i]);

        Vx = Qx + K[i].transpose() * Quu * kff[i] + K[i].transpose() * Qu +
             Qux.transpose() * kff[i];
        Vxx = Qxx + K[i].transpose() * Quu * K[i] + K[i].transpose() * Qux +
              Qux.transpose() * K[i];
        Vxx = 0.5 * (Vxx + Vxx.transpose());
      }
    }

    // Forward pass with backtracking line search.
    bool accepted = false;
    for (double alpha = 1.0; alpha >= 1e-4; alpha *= st.backtrack) {
      Rollout cand;
      cand.x.assign(L + 1, Eigen::VectorXd());
      cand.u.assign(L, Eigen::VectorXd());
      cand.x[0] = x0;
      bool finite = true;
      for (int i = 0; i < L; ++i) {
        cand.u[i] = nom.u[i] + alpha * kff[i] + K[i] * (cand.x[i] - nom.x[i]);
        try {
          cand.x[i + 1] = f_d(cand.x[i], cand.u[i]);
        } catch (const NonFiniteError&) {
          finite = false;
          break;
        }
      }
      if (!finite) continue;
      cand.cost = trajectory_cost(task, cand.x, cand.u);

      double expected = -(alpha * dv1 + 0.5 * alpha * alpha * dv2);
      double actual = nom.cost - cand.cost;
      bool ok = expected > 0 ? actual >= st.armijo * expected : actual > 0;
      if (ok) {
        double rel_decrease = actual / std::max(1.0, nom.cost);
        nom = std::move(cand);
        sol.cost_trace.push_back(nom.cost);
        sol.K = K;
        sol.k = kff;
        reg = std::max(st.reg_init, reg / st.reg_factor);
        accepted = true;
        if (rel_decrease < st.cost_tol) converged = true;
        break;
      }
    }
    sol.iterations = iter + 1;

    if (!accepted) {
      // No step produced sufficient decrease; either converged or stiffen.
      double expected_full = -(dv1 + 0.5 * dv2);
      if (std::abs(expected_full) < 1e-12 * std::max(1.0, nom.cost)) {
        converged = true;
      } else {
        reg *= st.reg_factor;
        if (reg > st.reg_max) throw Error("ilqr: diverged (regularization exhausted)");
      }
    }
  }

  sol.x_nom = nom.x;
  sol.u_nom = nom.u;
  sol.final_cost = nom.cost;
  return sol;
}

void IlqrController::episode_init(const envs::ResetInfo& info) {
  IlqrSettings st = settings_;
  st.physics_substeps = info.physics_substeps;
  solution_ = ilqr_solve(info.prior_model, info.task, info.x0, info.control_dt, st);
}

Eigen::VectorXd IlqrController::act(const Eigen::VectorXd& obs, int step) {
  const int i = std::min<int>(step, static_cast<int>(solution_.u_nom.size()) - 1);
  return solution_.u_nom[i] + solution_.K[i] * (obs - solution_.x_nom[i]);
}

}  // namespace safectl::control
