#include "safectl/safefilters/gp.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "safectl/errors.hpp"

namespace safectl::safefilters {

namespace {

constexpr double kLogParamMin = -23.0;  // ~1e-10 in natural units
constexpr double kLogParamMax = 10.0;

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& Z, const Eigen::VectorXd& mean,
                               const Eigen::VectorXd& std) {
  return (Z.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

/// Noise-free kernel matrix and, optionally, the per-dimension scaled squared
/// distance matrices needed for the lengthscale gradients.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& Zn, const Eigen::VectorXd& lp,
                              std::vector<Eigen::MatrixXd>* dist) {
  const int N = static_cast<int>(Zn.rows());
  const int D = static_cast<int>(Zn.cols());
  const double sf2 = std::exp(lp(0));
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(N, N);
  if (dist) dist->assign(D, Eigen::MatrixXd());
  for (int d = 0; d < D; ++d) {
    const double inv_l2 = std::exp(-2.0 * lp(1 + d));
    Eigen::VectorXd col = Zn.col(d);
    Eigen::MatrixXd Dd =
        (col.replicate(1, N) - col.transpose().replicate(N, 1)).array().square() * inv_l2;
    S += Dd;
    if (dist) (*dist)[d] = std::move(Dd);
  }
  return sf2 * (-0.5 * S.array()).exp().matrix();
}

struct Starts {
  std::vector<Eigen::VectorXd> points;
};

}  // namespace

double gp_log_marginal(const Eigen::MatrixXd& Zn, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& lp, Eigen::VectorXd* grad) {
  const int N = static_cast<int>(Zn.rows());
  const int D = static_cast<int>(Zn.cols());
  if (lp.size() != D + 2) throw DimensionError("gp: log-parameter vector has wrong size");

  std::vector<Eigen::MatrixXd> dist;
  Eigen::MatrixXd Kf = kernel_matrix(Zn, lp, grad ? &dist : nullptr);
  const double sn2 = std::exp(lp(D + 1));
  Eigen::MatrixXd Ky = Kf + sn2 * Eigen::MatrixXd::Identity(N, N);

  Eigen::LLT<Eigen::MatrixXd> llt(Ky);
  if (llt.info() != Eigen::Success) {
    if (grad) grad->setZero(D + 2);
    return -std::numeric_limits<double>::infinity();
  }
  Eigen::VectorXd alpha = llt.solve(y);
  double logdet = 0.0;
  for (int i = 0; i < N; ++i) logdet += std::log(llt.matrixL()(i, i));
  const double lml =
      -0.5 * y.dot(alpha) - logdet - 0.5 * N * std::log(2.0 * M_PI);

  if (grad) {
    Eigen::MatrixXd Kinv = llt.solve(Eigen::MatrixXd::Identity(N, N));
    Eigen::MatrixXd W = alpha * alpha.transpose() - Kinv;
    grad->resize(D + 2);
    (*grad)(0) = 0.5 * (W.array() * Kf.array()).sum();
    for (int d = 0; d < D; ++d)
      (*grad)(1 + d) = 0.5 * (W.array() * Kf.array() * dist[d].array()).sum();
    (*grad)(D + 1) = 0.5 * sn2 * W.trace();
  }
  return lml;
}

GpModel gp_fit(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Y, const GpOptions& opts) {
  const int N = static_cast<int>(Z.rows());
  const int D = static_cast<int>(Z.cols());
  const int Dy = static_cast<int>(Y.cols());
  if (N < 2) throw DimensionError("gp: need at least 2 samples");
  if (Y.rows() != N) throw DimensionError("gp: Z and Y row counts differ");

  GpModel m;
  m.Z = Z;
  m.z_mean = Z.colwise().mean();
  m.z_std = ((Z.rowwise() - m.z_mean.transpose()).array().square().colwise().sum() / N)
                .sqrt()
                .matrix();
  m.z_std = m.z_std.cwiseMax(1e-12);
  m.y_mean = Y.colwise().mean();
  m.y_std = ((Y.rowwise() - m.y_mean.transpose()).array().square().colwise().sum() / N)
                .sqrt()
                .matrix();
  m.y_std = m.y_std.cwiseMax(1e-12);

  Eigen::MatrixXd Zn = normalize_rows(Z, m.z_mean, m.z_std);

  m.log_params.resize(Dy);
  m.alpha.resize(Dy);
  m.chol.resize(Dy);
  m.lml.resize(Dy);

  for (int j = 0; j < Dy; ++j) {
    Eigen::VectorXd y = (Y.col(j).array() - m.y_mean(j)) / m.y_std(j);
    const double noise_init =
        opts.fixed_noise_var ? *opts.fixed_noise_var / (m.y_std(j) * m.y_std(j)) : 1e-4;
    const double log_noise =
        std::clamp(std::log(std::max(noise_init, 1e-300)), kLogParamMin, kLogParamMax);

    Starts starts;
    for (double ell : {1.0, 0.3, 3.0}) {
      Eigen::VectorXd lp(D + 2);
      lp(0) = 0.0;  // unit signal variance in normalized space
      lp.segment(1, D).setConstant(std::log(ell));
      lp(D + 1) = log_noise;
      starts.points.push_back(lp);
    }

    Eigen::VectorXd best = starts.points[0];
    double best_lml = -std::numeric_limits<double>::infinity();
    for (auto lp : starts.points) {
      double f = gp_log_marginal(Zn, y, lp);
      if (opts.optimize) {
        Eigen::VectorXd g;
        f = gp_log_marginal(Zn, y, lp, &g);
        double step = 0.1;
        for (int it = 0; it < opts.max_iter; ++it) {
          if (opts.fixed_noise_var) g(D + 1) = 0.0;
          if (g.cwiseAbs().maxCoeff() < opts.grad_tol) break;
          // Backtracking ascent step on the log marginal likelihood.
          bool improved = false;
          for (int bt = 0; bt < 30; ++bt) {
            Eigen::VectorXd cand =
                (lp + step * g).cwiseMax(kLogParamMin).cwiseMin(kLogParamMax);
            if (opts.fixed_noise_var) cand(D + 1) = lp(D + 1);
            Eigen::VectorXd gc;
            const double fc = gp_log_marginal(Zn, y, cand, &gc);
            if (fc > f) {
              lp = cand;
              f = fc;
              g = gc;
              step = std::min(step * 1.5, 10.0);
              improved = true;
              break;
            }
            step *= 0.5;
          }
          if (!improved) break;
        }
      }
      if (f > best_lml) {
        best_lml = f;
        best = lp;
      }
    }

    m.log_params[j] = best;
    m.lml[j] = best_lml;
    Eigen::MatrixXd Ky = kernel_matrix(Zn, best, nullptr);
    Ky.diagonal().array() += std::exp(best(D + 1));
    Eigen::LLT<Eigen::MatrixXd> llt(Ky);
    if (llt.info() != Eigen::Success) {
      // Jitter ladder as a last resort before reporting non-PD.
      double jitter = 1e-10 * Ky.trace() / N;
      for (int t = 0; t < 5 && llt.info() != Eigen::Success; ++t, jitter *= 10.0) {
        Eigen::MatrixXd Kj = Ky + jitter * Eigen::MatrixXd::Identity(N, N);
        llt.compute(Kj);
      }
      if (llt.info() != Eigen::Success)
        throw NotPdError("gp: kernel matrix is not positive definite");
    }
    m.chol[j] = llt.matrixL();
    // The weight vector comes from a truncated eigendecomposition: with the
    // noise driven toward zero the kernel is numerically rank deficient and
    // a plain Cholesky solve amplifies the null-space garbage. Discarding
    // eigenvalues at round-off level keeps interpolation accurate.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ky);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double cut = ev(N - 1) * N * std::numeric_limits<double>::epsilon();
    Eigen::VectorXd proj = es.eigenvectors().transpose() * y;
    for (int i = 0; i < N; ++i) proj(i) = ev(i) > cut ? proj(i) / ev(i) : 0.0;
    m.alpha[j] = es.eigenvectors() * proj;
  }
  return m;
}

GpPrediction gp_predict(const GpModel& m, const Eigen::VectorXd& z) {
  const int N = m.num_points();
  const int D = m.input_dim();
  const int Dy = m.output_dim();
  if (z.size() != D) throw DimensionError("gp: query dimension mismatch");

  Eigen::VectorXd zn = (z - m.z_mean).cwiseQuotient(m.z_std);
  Eigen::MatrixXd Zn = normalize_rows(m.Z, m.z_mean, m.z_std);

  GpPrediction out;
  out.mean.resize(Dy);
  out.var.resize(Dy);
  for (int j = 0; j < Dy; ++j) {
    const Eigen::VectorXd& lp = m.log_params[j];
    const double sf2 = std::exp(lp(0));
    Eigen::VectorXd ks(N);
    for (int i = 0; i < N; ++i) {
      double s = 0.0;
      for (int d = 0; d < D; ++d) {
        const double dz = (zn(d) - Zn(i, d)) * std::exp(-lp(1 + d));
        s += dz * dz;
      }
      ks(i) = sf2 * std::exp(-0.5 * s);
    }
    const double mean_n = ks.dot(m.alpha[j]);
    Eigen::VectorXd v = m.chol[j].triangularView<Eigen::Lower>().solve(ks);
    const double var_n = std::max(sf2 - v.squaredNorm(), 0.0);
    out.mean(j) = m.y_mean(j) + m.y_std(j) * mean_n;
    out.var(j) = m.y_std(j) * m.y_std(j) * var_n;
  }
  return out;
}

}  // namespace safectl::safefilters
