#include "dcsep/acquisition.hpp"

#include <algorithm>
#include <cmath>

namespace dcsep::hpo {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865476;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
// Below this variance the posterior is treated as deterministic.
constexpr double kVarFloor = 1e-18;

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }
double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

}  // namespace

double expected_improvement(double mean, double var, double best_y, double xi) {
  const double margin = best_y - xi - mean;
  if (var <= kVarFloor) return std::max(margin, 0.0);
  const double sigma = std::sqrt(var);
  const double z = margin / sigma;
  return margin * normal_cdf(z) + sigma * normal_pdf(z);
}

double probability_of_improvement(double mean, double var, double best_y, double xi) {
  const double margin = best_y - xi - mean;
  if (var <= kVarFloor) return margin > 0.0 ? 1.0 : 0.0;
  return normal_cdf(margin / std::sqrt(var));
}

double acquisition(const Gp& gp, const Eigen::VectorXd& x, double best_y, const AcqConfig& cfg) {
  const Prediction p = gp.predict(x);
  return cfg.kind == AcqKind::ExpectedImprovement
             ? expected_improvement(p.mean, p.var, best_y, cfg.xi)
             : probability_of_improvement(p.mean, p.var, best_y, cfg.xi);
}

double acquisition_with_grad(const Gp& gp, const Eigen::VectorXd& x, double best_y,
                             const AcqConfig& cfg, Eigen::VectorXd& grad) {
  const PredictionWithGrad p = gp.predict_with_grad(x);
  const double margin = best_y - cfg.xi - p.mean;

  if (p.var <= kVarFloor) {
    grad.setZero(x.size());
    if (cfg.kind == AcqKind::ExpectedImprovement) {
      if (margin > 0.0) grad = -p.dmean;  // d max(margin, 0) / dx
      return std::max(margin, 0.0);
    }
    return margin > 0.0 ? 1.0 : 0.0;
  }

  const double sigma = std::sqrt(p.var);
  const double z = margin / sigma;
  const double cdf = normal_cdf(z);
  const double pdf = normal_pdf(z);
  const Eigen::VectorXd dsigma = p.dvar / (2.0 * sigma);

  if (cfg.kind == AcqKind::ExpectedImprovement) {
    grad = -cdf * p.dmean + pdf * dsigma;
    return margin * cdf + sigma * pdf;
  }
  grad = (pdf / sigma) * (-p.dmean - z * dsigma);
  return cdf;
}

}  // namespace dcsep::hpo
