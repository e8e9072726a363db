#include "dcsep/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "dcsep/error.hpp"

namespace dcsep::hpo {

namespace {

Eigen::VectorXd clip(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                     const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

LbfgsResult lbfgs_minimize(const ObjectiveFn& f, Eigen::VectorXd x0, const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi, const LbfgsOptions& opt) {
  const Eigen::Index n = x0.size();
  if (lo.size() != n || hi.size() != n)
    throw ShapeError("lbfgs_minimize: bounds do not match the start point");
  if ((lo.array() > hi.array()).any()) throw ConfigError("lbfgs_minimize: lo exceeds hi");

  LbfgsResult res;
  res.x = clip(x0, lo, hi);
  Eigen::VectorXd grad(n);
  res.f = f(res.x, grad);
  res.trace.push_back(res.f);

  struct Pair {
    Eigen::VectorXd s, y;
    double rho;
  };
  std::deque<Pair> pairs;

  for (int iter = 0; iter < opt.max_iters; ++iter) {
    res.iters = iter;
    // Projected-gradient stationarity: a point is optimal on the box when a
    // unit gradient step leaves it unchanged after projection.
    const double pg = (clip(res.x - grad, lo, hi) - res.x).lpNorm<Eigen::Infinity>();
    if (pg < opt.tol) {
      res.converged = true;
      return res;
    }

    // Two-loop recursion for d = -H grad with the stored curvature pairs.
    Eigen::VectorXd d = -grad;
    std::vector<double> alpha(pairs.size());
    for (size_t i = pairs.size(); i-- > 0;) {
      alpha[i] = pairs[i].rho * pairs[i].s.dot(d);
      d -= alpha[i] * pairs[i].y;
    }
    if (!pairs.empty()) {
      const Pair& last = pairs.back();
      d *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (size_t i = 0; i < pairs.size(); ++i) {
      const double beta = pairs[i].rho * pairs[i].y.dot(d);
      d += (alpha[i] - beta) * pairs[i].s;
    }
    if (d.dot(grad) >= 0.0) d = -grad;  // fall back to steepest descent

    // Backtracking Armijo search on the projected candidate.
    double step = 1.0;
    Eigen::VectorXd x_new;
    Eigen::VectorXd grad_new(n);
    double f_new = res.f;
    bool accepted = false;
    for (int ls = 0; ls < opt.max_line_steps; ++ls) {
      x_new = clip(res.x + step * d, lo, hi);
      const Eigen::VectorXd dx = x_new - res.x;
      if (dx.lpNorm<Eigen::Infinity>() == 0.0) break;
      f_new = f(x_new, grad_new);
      if (std::isfinite(f_new) && f_new <= res.f + opt.armijo_c1 * grad.dot(dx)) {
        accepted = true;
        break;
      }
      step *= opt.shrink;
    }
    if (!accepted) return res;  // no further progress possible along d

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      pairs.push_back({s, y, 1.0 / sy});
      if (static_cast<int>(pairs.size()) > opt.memory) pairs.pop_front();
    }

    res.x = x_new;
    res.f = f_new;
    grad = grad_new;
    res.trace.push_back(res.f);
  }
  res.iters = opt.max_iters;
  return res;
}

}  // namespace dcsep::hpo
