#include "safectl/dynamics/model.hpp"

#include "safectl/errors.hpp"

namespace safectl::dynamics {

std::string to_string(SystemId id) {
  switch (id) {
    case SystemId::CartPole: return "cart_pole";
    case SystemId::Quad1D: return "quad_1d";
    case SystemId::Quad2D: return "quad_2d";
  }
  return "unknown";
}

DynamicsModel DynamicsModel::cart_pole(const CartPoleParams& p) {
  DynamicsModel m;
  m.id_ = SystemId::CartPole;
  m.nx_ = 4;
  m.nu_ = 1;
  m.params_ = p;
  m.state_labels_ = {"x", "x_dot", "theta", "theta_dot"};
  m.input_labels_ = {"F"};
  m.accel_channels_ = {1, 3};
  return m;
}

DynamicsModel DynamicsModel::quad_1d(const Quad1DParams& p) {
  DynamicsModel m;
  m.id_ = SystemId::Quad1D;
  m.nx_ = 2;
  m.nu_ = 1;
  m.params_ = p;
  m.state_labels_ = {"z", "z_dot"};
  m.input_labels_ = {"T"};
  m.accel_channels_ = {1};
  return m;
}

DynamicsModel DynamicsModel::quad_2d(const Quad2DParams& p) {
  DynamicsModel m;
  m.id_ = SystemId::Quad2D;
  m.nx_ = 6;
  m.nu_ = 2;
  m.params_ = p;
  m.state_labels_ = {"x", "x_dot", "z", "z_dot", "theta", "theta_dot"};
  m.input_labels_ = {"T1", "T2"};
  m.accel_channels_ = {1, 3, 5};
  return m;
}

void DynamicsModel::check_dims(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  if (x.size() != nx_ || u.size() != nu_)
    throw DimensionError("DynamicsModel: state/input dimension mismatch for " + to_string(id_));
}

Eigen::VectorXd DynamicsModel::dynamics(const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& u) const {
  check_dims(x, u);
  Eigen::VectorXd xdot(nx_);
  switch (id_) {
    case SystemId::CartPole: {
      const auto& p = std::get<CartPoleParams>(params_);
      const double F = u(0);
      const double th = x(2), thd = x(3);
      const double s = std::sin(th), c = std::cos(th);
      const double M = p.m_c + p.m_p;
      // theta_dd is explicit; x_dd then follows by substitution.
      const double a = (F + p.m_p * p.l * thd * thd * s) / M;
      const double denom = p.l * (4.0 / 3.0 - p.m_p * c * c / M);
      const double th_dd = (p.g * s - c * a) / denom;
      const double x_dd = a - p.m_p * p.l * th_dd * c / M;
      xdot << x(1), x_dd, thd, th_dd;
      break;
    }
    case SystemId::Quad1D: {
      const auto& p = std::get<Quad1DParams>(params_);
      xdot << x(1), u(0) / p.m - p.g;
      break;
    }
    case SystemId::Quad2D: {
      const auto& p = std::get<Quad2DParams>(params_);
      const double th = x(4), thd = x(5);
      const double T = u(0) + u(1);
      const double s = std::sin(th), c = std::cos(th);
      xdot << x(1), s * T / p.m,
              x(3), c * T / p.m - p.g,
              thd, (u(1) - u(0)) * p.moment_arm() / p.I_yy;
      break;
    }
  }
  return xdot;
}

void DynamicsModel::jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                              Eigen::MatrixXd& A, Eigen::MatrixXd& B) const {
  check_dims(x, u);
  A = Eigen::MatrixXd::Zero(nx_, nx_);
  B = Eigen::MatrixXd::Zero(nx_, nu_);
  switch (id_) {
    case SystemId::CartPole: {
      const auto& p = std::get<CartPoleParams>(params_);
      const double F = u(0);
      const double th = x(2), thd = x(3);
      const double s = std::sin(th), c = std::cos(th);
      const double M = p.m_c + p.m_p;
      const double ml = p.m_p * p.l;

      const double a = (F + ml * thd * thd * s) / M;
      const double da_dth = ml * thd * thd * c / M;
      const double da_dthd = 2.0 * ml * thd * s / M;
      const double da_dF = 1.0 / M;

      const double N = p.g * s - c * a;
      const double D = p.l * (4.0 / 3.0 - p.m_p * c * c / M);
      const double dN_dth = p.g * c + s * a - c * da_dth;
      const double dN_dthd = -c * da_dthd;
      const double dN_dF = -c * da_dF;
      const double dD_dth = 2.0 * p.l * p.m_p * s * c / M;

      const double th_dd = N / D;
      const double dthdd_dth = (dN_dth * D - N * dD_dth) / (D * D);
      const double dthdd_dthd = dN_dthd / D;
      const double dthdd_dF = dN_dF / D;

      const double dxdd_dth = da_dth - (ml / M) * (c * dthdd_dth - s * th_dd);
      const double dxdd_dthd = da_dthd - (ml * c / M) * dthdd_dthd;
      const double dxdd_dF = da_dF - (ml * c / M) * dthdd_dF;

      A(0, 1) = 1.0;
      A(1, 2) = dxdd_dth;
      A(1, 3) = dxdd_dthd;
      A(2, 3) = 1.0;
      A(3, 2) = dthdd_dth;
      A(3, 3) = dthdd_dthd;
      B(1, 0) = dxdd_dF;
      B(3, 0) = dthdd_dF;
      break;
    }
    case SystemId::Quad1D: {
      const auto& p = std::get<Quad1DParams>(params_);
      A(0, 1) = 1.0;
      B(1, 0) = 1.0 / p.m;
      break;
    }
    case SystemId::Quad2D: {
      const auto& p = std::get<Quad2DParams>(params_);
      const double th = x(4);
      const double T = u(0) + u(1);
      const double s = std::sin(th), c = std::cos(th);
      A(0, 1) = 1.0;
      A(2, 3) = 1.0;
      A(4, 5) = 1.0;
      A(1, 4) = c * T / p.m;
      A(3, 4) = -s * T / p.m;
      B(1, 0) = s / p.m;
      B(1, 1) = s / p.m;
      B(3, 0) = c / p.m;
      B(3, 1) = c / p.m;
      B(5, 0) = -p.moment_arm() / p.I_yy;
      B(5, 1) = p.moment_arm() / p.I_yy;
      break;
    }
  }
}

Eigen::VectorXd DynamicsModel::equilibrium_state() const {
  return Eigen::VectorXd::Zero(nx_);
}

Eigen::VectorXd DynamicsModel::equilibrium_input() const {
  Eigen::VectorXd u(nu_);
  switch (id_) {
    case SystemId::CartPole:
      u << 0.0;
      break;
    case SystemId::Quad1D: {
      const auto& p = std::get<Quad1DParams>(params_);
      u << p.m * p.g;
      break;
    }
    case SystemId::Quad2D: {
      const auto& p = std::get<Quad2DParams>(params_);
      u << 0.5 * p.m * p.g, 0.5 * p.m * p.g;
      break;
    }
  }
  return u;
}

DynamicsModel DynamicsModel::scaled(double factor) const {
  DynamicsModel out = *this;
  switch (id_) {
    case SystemId::CartPole: {
      auto p = std::get<CartPoleParams>(params_);
      p.m_c *= factor;
      p.m_p *= factor;
      p.l *= factor;
      out.params_ = p;
      break;
    }
    case SystemId::Quad1D: {
      auto p = std::get<Quad1DParams>(params_);
      p.m *= factor;
      out.params_ = p;
      break;
    }
    case SystemId::Quad2D: {
      auto p = std::get<Quad2DParams>(params_);
      p.m *= factor;
      p.I_yy *= factor;
      out.params_ = p;
      break;
    }
  }
  return out;
}

}  // namespace safectl::dynamics
