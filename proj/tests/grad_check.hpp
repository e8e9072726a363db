#pragma once

// Central-difference gradient checking used by the op tests and the
// acceptance run. The probe loss is L = sum(w .* out) for a fixed random
// weighting w, so dL/d(node) can be checked element by element.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dcsep/graph.hpp"

namespace dcsep::testing {

inline nn::Tensor random_tensor(std::vector<Eigen::Index> shape, std::mt19937_64& rng,
                                double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  nn::Tensor t(std::move(shape));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

// All-distinct values bounded away from zero: shuffled distinct magnitudes
// in (0, 2] with alternating signs. Keeps finite differences clear of relu
// kinks and pooling ties.
inline nn::Tensor distinct_tensor(std::vector<Eigen::Index> shape, std::mt19937_64& rng) {
  nn::Tensor t(std::move(shape));
  const Eigen::Index n = t.size();
  std::vector<double> grid(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mag = (static_cast<double>(i) + 0.5) * 2.0 / static_cast<double>(n);
    grid[static_cast<size_t>(i)] = (i % 2 == 0) ? mag : -mag;
  }
  std::shuffle(grid.begin(), grid.end(), rng);
  for (Eigen::Index i = 0; i < n; ++i) t[i] = grid[static_cast<size_t>(i)];
  return t;
}

inline double probe_loss(const nn::Tensor& out, const nn::Tensor& w) {
  return (out.array() * w.array()).sum();
}

// Worst relative error between tape gradients and central differences of
// the probe loss, taken over every element of every node in `wrt`.
inline double fd_max_rel_error(nn::Graph& g, nn::NodeId out, const std::vector<nn::NodeId>& wrt,
                               std::mt19937_64& rng, double h = 1e-5) {
  g.forward();
  const nn::Tensor w = random_tensor(g.value(out).shape(), rng);
  g.zero_param_grads();
  g.backward(out, w);
  std::vector<nn::Tensor> analytic;
  analytic.reserve(wrt.size());
  for (nn::NodeId id : wrt) analytic.push_back(g.grad(id));

  double worst = 0.0;
  for (size_t k = 0; k < wrt.size(); ++k) {
    nn::Tensor& val = g.node(wrt[k]).value;
    for (Eigen::Index i = 0; i < val.size(); ++i) {
      const double orig = val[i];
      val[i] = orig + h;
      g.forward();
      const double lp = probe_loss(g.value(out), w);
      val[i] = orig - h;
      g.forward();
      const double lm = probe_loss(g.value(out), w);
      val[i] = orig;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  g.forward();  // leave the graph consistent with the restored values
  return worst;
}

}  // namespace dcsep::testing
