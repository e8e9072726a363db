#pragma once

#include <Eigen/Core>

#include "dcsep/gp.hpp"

namespace dcsep::hpo {

enum class AcqKind { ExpectedImprovement, ProbabilityOfImprovement };

struct AcqConfig {
  AcqKind kind = AcqKind::ExpectedImprovement;
  double xi = 0.01;   // exploration margin subtracted from the incumbent
  int restarts = 16;  // multi-start count used by the proposal optimizer
};

// Improvement utilities under the minimization convention: a candidate
// improves when its value falls below best_y - xi. With sigma = 0 the
// probability collapses to {0, 1} by the sign of the margin and the
// expectation to max(margin, 0).
double expected_improvement(double mean, double var, double best_y, double xi);
double probability_of_improvement(double mean, double var, double best_y, double xi);

// Acquisition value at an encoded point.
double acquisition(const Gp& gp, const Eigen::VectorXd& x, double best_y, const AcqConfig& cfg);

// Value plus gradient with respect to x, for gradient-based maximization.
double acquisition_with_grad(const Gp& gp, const Eigen::VectorXd& x, double best_y,
                             const AcqConfig& cfg, Eigen::VectorXd& grad);

}  // namespace dcsep::hpo
