#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace dcsep::hpo {

// Objective callback: returns f(x) and fills grad (same size as x).
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsOptions {
  int max_iters = 100;
  int memory = 10;          // stored curvature pairs
  double tol = 1e-9;        // projected-gradient infinity norm
  double armijo_c1 = 1e-4;  // sufficient-decrease slope fraction
  double shrink = 0.5;      // line-search backtracking factor
  int max_line_steps = 40;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iters = 0;
  bool converged = false;
  // Accepted objective values, f at x0 first; non-increasing by construction
  // of the Armijo acceptance rule.
  std::vector<double> trace;
};

// Minimizes f over the box [lo, hi] with limited-memory BFGS: two-loop
// recursion for the search direction, steps projected onto the box, and a
// backtracking Armijo line search on the projected point. Deterministic.
LbfgsResult lbfgs_minimize(const ObjectiveFn& f, Eigen::VectorXd x0, const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi, const LbfgsOptions& opt = {});

}  // namespace dcsep::hpo
