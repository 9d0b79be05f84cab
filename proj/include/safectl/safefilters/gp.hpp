#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace safectl::safefilters {

/// Independent squared-exponential ARD regressor per output dimension,
/// operating on normalized inputs and targets. Hyperparameters are kept in
/// log space as [log signal_var, log lengthscale_1..D, log noise_var].
struct GpModel {
  Eigen::MatrixXd Z;             // raw training inputs, N x D
  Eigen::VectorXd z_mean, z_std; // input normalization
  Eigen::VectorXd y_mean, y_std; // per-output target normalization
  std::vector<Eigen::VectorXd> log_params;  // per output dim, size D + 2
  std::vector<Eigen::VectorXd> alpha;       // K^{ -1} y_norm per output dim
  std::vector<Eigen::MatrixXd> chol;        // lower Cholesky of K per output dim
  std::vector<double> lml;                  // achieved log marginal likelihood

  int num_points() const { return static_cast<int>(Z.rows()); }
  int input_dim() const { return static_cast<int>(Z.cols()); }
  int output_dim() const { return static_cast<int>(y_mean.size()); }
};

struct GpOptions {
  bool optimize = true;
  int max_iter = 150;
  double grad_tol = 1e-6;
  /// Observation noise variance in raw target units; fixed (not optimized)
  /// when set.
  std::optional<double> fixed_noise_var;
};

/// Fits one GP per column of Y. With optimize, hyperparameters maximize the
/// log marginal likelihood by multi-start gradient ascent with analytic
/// gradients; otherwise heuristic defaults (unit lengthscales in normalized
/// space) are used. Requires at least 2 samples.
GpModel gp_fit(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Y,
               const GpOptions& opts = {});

struct GpPrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;  // latent (noise-free) predictive variance, >= 0
};

GpPrediction gp_predict(const GpModel& model, const Eigen::VectorXd& z);

/// Log marginal likelihood and its gradient w.r.t. the log hyperparameters
/// for one output dimension over normalized data. Exposed for verification.
double gp_log_marginal(const Eigen::MatrixXd& Zn, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& log_params, Eigen::VectorXd* grad = nullptr);

}  // namespace safectl::safefilters
