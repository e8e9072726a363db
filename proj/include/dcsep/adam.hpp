#pragma once

#include <vector>

#include "dcsep/graph.hpp"

namespace dcsep::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a graph's parameters. Moment buffers are
// keyed by parameter order, so the optimizer must outlive a single graph
// and must not be reused across differently shaped graphs.
class Adam {
 public:
  explicit Adam(const AdamConfig& cfg = {}) : cfg_(cfg) {}

  // Applies one update from the currently accumulated parameter gradients.
  void step(Graph& g);

  int updates_done() const { return t_; }

 private:
  AdamConfig cfg_;
  int t_ = 0;
  std::vector<Eigen::ArrayXd> m_;
  std::vector<Eigen::ArrayXd> v_;
};

}  // namespace dcsep::nn
