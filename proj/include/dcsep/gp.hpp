#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace dcsep::hpo {

// Posterior of the latent (noise-free) function at one point.
struct Prediction {
  double mean = 0.0;
  double var = 0.0;
};

struct PredictionWithGrad {
  double mean = 0.0;
  double var = 0.0;
  Eigen::VectorXd dmean;
  Eigen::VectorXd dvar;
};

// Log marginal likelihood of y at inputs X under kernel hyperparameters
// theta = [log ell_1..ell_d, log signal_std, log noise_std], optionally with
// its gradient in the same coordinates. This is the objective Gp::fit
// ascends; exposed for diagnostics.
double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& log_theta,
                               Eigen::VectorXd* grad = nullptr);

// Gaussian-process regressor with a Matérn-5/2 kernel, one length scale per
// input dimension, a signal variance, and homoscedastic observation noise.
// Immutable once constructed; predictions may be issued concurrently.
class Gp {
 public:
  // Chooses kernel hyperparameters by maximizing the log marginal
  // likelihood with a bounded quasi-Newton ascent from `restarts` starts
  // (one default start plus random log-uniform draws). Observations are
  // standardized internally; predictions are returned on the original
  // scale. Requires at least two observations.
  static Gp fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::uint64_t seed,
                int restarts = 8);

  // Fixed kernel hyperparameters, observations taken as-is with a zero-mean
  // prior. This is the reference entry point for closed-form comparisons.
  static Gp with_kernel(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        Eigen::VectorXd length_scales, double signal_var, double noise_var);

  Prediction predict(const Eigen::VectorXd& x) const;
  PredictionWithGrad predict_with_grad(const Eigen::VectorXd& x) const;

  double log_marginal() const { return lml_; }
  // Accepted log-marginal values along the winning restart's ascent, in
  // order; non-decreasing. Empty for fixed-kernel instances.
  const std::vector<double>& fit_trace() const { return fit_trace_; }
  const Eigen::VectorXd& length_scales() const { return ell_; }
  double signal_var() const { return signal_var_; }
  double noise_var() const { return noise_var_; }
  Eigen::Index dims() const { return X_.cols(); }
  Eigen::Index observations() const { return X_.rows(); }

 private:
  Gp() = default;
  void factorize();  // Cholesky of K + noise, escalating jitter

  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;  // standardized when built via fit()
  double y_mean_ = 0.0;
  double y_std_ = 1.0;
  Eigen::VectorXd ell_;
  double signal_var_ = 1.0;
  double noise_var_ = 1e-6;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;  // (K + noise I)^{-1} y
  double lml_ = 0.0;
  std::vector<double> fit_trace_;
};

}  // namespace dcsep::hpo
