#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

namespace safectl::dynamics {

enum class SystemId { CartPole, Quad1D, Quad2D };

std::string to_string(SystemId id);

struct CartPoleParams {
  double m_c = 1.0;   // cart mass [kg]
  double m_p = 0.1;   // pole mass [kg]
  double l = 0.5;     // pole half-length [m]
  double g = 9.8;
};

struct Quad1DParams {
  double m = 0.027;   // mass [kg]
  double g = 9.8;
};

struct Quad2DParams {
  double m = 0.027;      // mass [kg]
  double I_yy = 1.4e-5;  // pitch inertia [kg m^2]
  double l_arm = 0.0397; // arm length [m]
  double g = 9.8;

  // Effective moment arm, always derived from l_arm.
  double moment_arm() const { return l_arm / std::sqrt(2.0); }
};

/// Continuous-time model xdot = f(x, u) with analytic Jacobians.
/// State orderings: cart-pole [x, xdot, theta, thetadot]; 1D quadrotor
/// [z, zdot]; 2D quadrotor [x, xdot, z, zdot, theta, thetadot].
class DynamicsModel {
 public:
  static DynamicsModel cart_pole(const CartPoleParams& p = {});
  static DynamicsModel quad_1d(const Quad1DParams& p = {});
  static DynamicsModel quad_2d(const Quad2DParams& p = {});

  SystemId id() const { return id_; }
  int nx() const { return nx_; }
  int nu() const { return nu_; }
  const std::vector<std::string>& state_labels() const { return state_labels_; }
  const std::vector<std::string>& input_labels() const { return input_labels_; }

  Eigen::VectorXd dynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
  void jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                 Eigen::MatrixXd& A, Eigen::MatrixXd& B) const;

  /// Upright (cart-pole) or hover (quadrotor) equilibrium pair.
  Eigen::VectorXd equilibrium_state() const;
  Eigen::VectorXd equilibrium_input() const;

  /// Indices of the acceleration entries of xdot (disturbance force entry points).
  const std::vector<int>& accel_channels() const { return accel_channels_; }

  /// Copy with inertial parameters multiplied by `factor` (prior mismatch).
  DynamicsModel scaled(double factor) const;

  const CartPoleParams& cart_pole_params() const { return std::get<CartPoleParams>(params_); }
  const Quad1DParams& quad_1d_params() const { return std::get<Quad1DParams>(params_); }
  const Quad2DParams& quad_2d_params() const { return std::get<Quad2DParams>(params_); }

 private:
  SystemId id_;
  int nx_ = 0;
  int nu_ = 0;
  std::variant<CartPoleParams, Quad1DParams, Quad2DParams> params_;
  std::vector<std::string> state_labels_, input_labels_;
  std::vector<int> accel_channels_;

  void check_dims(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
};

}  // namespace safectl::dynamics
