#include "dcsep/gp.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "dcsep/error.hpp"
#include "dcsep/lbfgs.hpp"

namespace dcsep::hpo {

namespace {

constexpr double kSqrt5 = 2.2360679774997896;
constexpr double kLogTwoPi = 1.8378770664093453;

// Scaled distance r and the Matérn-5/2 profile s^2 (1 + u + u^2/3) e^{-u}
// with u = sqrt(5) r. Derivatives use the identity sqrt(5) u / r = 5, which
// keeps every formula finite at r = 0.
double matern(double r, double signal_var) {
  const double u = kSqrt5 * r;
  return signal_var * (1.0 + u + u * u / 3.0) * std::exp(-u);
}

double scaled_dist(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                   const Eigen::VectorXd& ell) {
  return std::sqrt(((a - b).array() / ell.array()).square().sum());
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, const Eigen::VectorXd& ell,
                              double signal_var) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = signal_var;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      K(i, j) = matern(scaled_dist(X.row(i), X.row(j), ell), signal_var);
      K(j, i) = K(i, j);
    }
  }
  return K;
}

// Hyperparameters in log space: [log ell_1..d, log signal_std, log noise_std].
struct Theta {
  Eigen::VectorXd ell;
  double signal_var;
  double noise_var;
};

Theta unpack(const Eigen::VectorXd& t) {
  const Eigen::Index d = t.size() - 2;
  Theta th;
  th.ell = t.head(d).array().exp();
  const double s = std::exp(t[d]);
  const double n = std::exp(t[d + 1]);
  th.signal_var = s * s;
  th.noise_var = n * n;
  return th;
}

struct LmlState {
  double lml;
  Eigen::VectorXd grad;  // in log space
};

// Log marginal likelihood and its gradient for standardized observations.
// Throws NumericalError if the kernel cannot be factorized even with the
// maximum jitter.
LmlState log_marginal_with_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& t) {
  const Theta th = unpack(t);
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();

  const Eigen::MatrixXd K = kernel_matrix(X, th.ell, th.signal_var);
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd Ky = K;
    Ky.diagonal().array() += th.noise_var + jitter;
    llt.compute(Ky);
    if (llt.info() == Eigen::Success) break;
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > 1e-4) throw NumericalError("gp: kernel factorization failed at max jitter");
  }

  const Eigen::VectorXd alpha = llt.solve(y);
  const double log_det = llt.matrixLLT().diagonal().array().log().sum();

  LmlState out;
  out.lml = -0.5 * y.dot(alpha) - log_det - 0.5 * static_cast<double>(n) * kLogTwoPi;

  // d lml / d theta_j = 0.5 tr((alpha alpha' - Ky^{-1}) dK/dtheta_j)
  const Eigen::MatrixXd Kinv =
      llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd A = alpha * alpha.transpose() - Kinv;

  out.grad.setZero(d + 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = A(i, j);
      if (i == j) {
        out.grad[d] += 0.5 * a * 2.0 * th.signal_var;  // dK_ii/dlog s = 2 s^2
        continue;
      }
      const double r = scaled_dist(X.row(i), X.row(j), th.ell);
      const double u = kSqrt5 * r;
      const double common = th.signal_var * (5.0 / 3.0) * (1.0 + u) * std::exp(-u);
      for (Eigen::Index k = 0; k < d; ++k) {
        const double dk = X(i, k) - X(j, k);
        out.grad[k] += 0.5 * a * common * dk * dk / (th.ell[k] * th.ell[k]);
      }
      out.grad[d] += a * K(i, j);  // 0.5 * a * 2K
    }
  out.grad[d + 1] = th.noise_var * A.trace();  // 0.5 tr(A * 2 sigma_n^2 I)
  return out;
}

}  // namespace

double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& log_theta, Eigen::VectorXd* grad) {
  if (X.rows() != y.size()) throw ShapeError("gp: X and y row counts differ");
  if (log_theta.size() != X.cols() + 2)
    throw ShapeError("gp: theta needs one length scale per column plus two variances");
  const LmlState s = log_marginal_with_grad(X, y, log_theta);
  if (grad) *grad = s.grad;
  return s.lml;
}

void Gp::factorize() {
  const Eigen::Index n = X_.rows();
  const Eigen::MatrixXd K = kernel_matrix(X_, ell_, signal_var_);
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd Ky = K;
    Ky.diagonal().array() += noise_var_ + jitter;
    llt_.compute(Ky);
    if (llt_.info() == Eigen::Success) break;
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > 1e-4) throw NumericalError("gp: kernel factorization failed at max jitter");
  }
  alpha_ = llt_.solve(y_);
  const double log_det = llt_.matrixLLT().diagonal().array().log().sum();
  lml_ = -0.5 * y_.dot(alpha_) - log_det - 0.5 * static_cast<double>(n) * kLogTwoPi;
}

Gp Gp::with_kernel(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   Eigen::VectorXd length_scales, double signal_var, double noise_var) {
  if (X.rows() != y.size()) throw ShapeError("gp: X and y row counts differ");
  if (length_scales.size() != X.cols()) throw ShapeError("gp: one length scale per dimension");
  if (signal_var <= 0.0 || noise_var < 0.0) throw ConfigError("gp: non-positive variance");
  Gp gp;
  gp.X_ = X;
  gp.y_ = y;
  gp.ell_ = std::move(length_scales);
  gp.signal_var_ = signal_var;
  gp.noise_var_ = noise_var;
  gp.factorize();
  return gp;
}

Gp Gp::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::uint64_t seed,
           int restarts) {
  if (X.rows() != y.size()) throw ShapeError("gp: X and y row counts differ");
  if (X.rows() < 2) throw ConfigError("gp: need at least two observations");
  if (restarts < 1) throw ConfigError("gp: need at least one restart");
  const Eigen::Index d = X.cols();

  Gp gp;
  gp.X_ = X;
  gp.y_mean_ = y.mean();
  const double var = (y.array() - gp.y_mean_).square().mean();
  gp.y_std_ = std::max(std::sqrt(var), 1e-12);
  gp.y_ = (y.array() - gp.y_mean_) / gp.y_std_;

  // Box for [log ell.., log signal_std, log noise_std] around the unit cube
  // scale of encoded inputs and unit-variance observations.
  Eigen::VectorXd lo(d + 2), hi(d + 2);
  lo.head(d).setConstant(std::log(1e-2));
  hi.head(d).setConstant(std::log(1e2));
  lo[d] = std::log(1e-4);
  hi[d] = std::log(1e1);
  lo[d + 1] = std::log(1e-6);
  hi[d + 1] = std::log(1e1);

  const ObjectiveFn objective = [&](const Eigen::VectorXd& t, Eigen::VectorXd& grad) {
    try {
      const LmlState s = log_marginal_with_grad(gp.X_, gp.y_, t);
      grad = -s.grad;
      return -s.lml;
    } catch (const NumericalError&) {
      grad.setZero(t.size());
      return std::numeric_limits<double>::infinity();
    }
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double best_f = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_t;
  std::vector<double> best_trace;
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd t0(d + 2);
    if (r == 0) {
      t0.head(d).setZero();  // ell = 1
      t0[d] = 0.0;           // signal std 1
      t0[d + 1] = std::log(1e-3);
    } else {
      for (Eigen::Index i = 0; i < d + 2; ++i) t0[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
    }
    LbfgsOptions opt;
    opt.max_iters = 80;
    opt.tol = 1e-7;
    LbfgsResult res = lbfgs_minimize(objective, t0, lo, hi, opt);
    if (res.f < best_f) {
      best_f = res.f;
      best_t = res.x;
      best_trace = std::move(res.trace);
    }
  }
  if (!best_t.size()) throw NumericalError("gp: no restart produced a usable fit");

  gp.fit_trace_.reserve(best_trace.size());
  for (const double f : best_trace) gp.fit_trace_.push_back(-f);

  const Theta th = unpack(best_t);
  gp.ell_ = th.ell;
  gp.signal_var_ = th.signal_var;
  gp.noise_var_ = th.noise_var;
  gp.factorize();
  return gp;
}

Prediction Gp::predict(const Eigen::VectorXd& x) const {
  const Eigen::Index n = X_.rows();
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i)
    ks[i] = matern(scaled_dist(x, X_.row(i), ell_), signal_var_);
  const Eigen::VectorXd v = llt_.solve(ks);
  Prediction p;
  p.mean = y_mean_ + y_std_ * ks.dot(alpha_);
  p.var = y_std_ * y_std_ * std::max(signal_var_ - ks.dot(v), 0.0);
  return p;
}

PredictionWithGrad Gp::predict_with_grad(const Eigen::VectorXd& x) const {
  const Eigen::Index n = X_.rows();
  const Eigen::Index d = X_.cols();
  Eigen::VectorXd ks(n);
  Eigen::MatrixXd J(n, d);  // J(i, :) = d k(x, x_i) / dx
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = scaled_dist(x, X_.row(i), ell_);
    const double u = kSqrt5 * r;
    ks[i] = signal_var_ * (1.0 + u + u * u / 3.0) * std::exp(-u);
    const double common = -signal_var_ * (5.0 / 3.0) * (1.0 + u) * std::exp(-u);
    J.row(i) = common * ((x - X_.row(i).transpose()).array() / ell_.array().square()).matrix();
  }
  const Eigen::VectorXd v = llt_.solve(ks);
  PredictionWithGrad p;
  p.mean = y_mean_ + y_std_ * ks.dot(alpha_);
  p.var = y_std_ * y_std_ * std::max(signal_var_ - ks.dot(v), 0.0);
  p.dmean = y_std_ * (J.transpose() * alpha_);
  p.dvar = y_std_ * y_std_ * (-2.0 * (J.transpose() * v));
  return p;
}

}  // namespace dcsep::hpo
