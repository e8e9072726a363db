#include "dcsep/adam.hpp"

#include <cmath>

#include "dcsep/error.hpp"

namespace dcsep::nn {

void Adam::step(Graph& g) {
  const std::vector<NodeId>& params = g.parameters();
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      const Eigen::Index n = g.value(params[i]).size();
      m_[i] = Eigen::ArrayXd::Zero(n);
      v_[i] = Eigen::ArrayXd::Zero(n);
    }
  }
  if (m_.size() != params.size())
    throw ShapeError("Adam: parameter count changed under the optimizer");

  ++t_;
  const double corr1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double corr2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& value = g.node(params[i]).value;
    const Tensor& grad = g.grad(params[i]);
    if (m_[i].size() != value.size())
      throw ShapeError("Adam: parameter shape changed under the optimizer");
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad.array();
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad.array().square();
    value.array() -= cfg_.lr * (m_[i] / corr1) / ((v_[i] / corr2).sqrt() + cfg_.eps);
  }
}

}  // namespace dcsep::nn
