#include "dcsep/dc_loss.hpp"

#include <Eigen/Dense>

#include "dcsep/error.hpp"

namespace dcsep {

nn::Tensor make_targets(const std::vector<dsp::Spectrogram>& sources) {
  if (sources.size() != 2)
    throw ConfigError("make_targets: exactly two sources supported, got " +
                      std::to_string(sources.size()));
  const Eigen::Index T = sources[0].frames(), F = sources[0].num_bins();
  if (sources[1].frames() != T || sources[1].num_bins() != F)
    throw ShapeError("make_targets: source spectrograms differ in shape");

  nn::Tensor u({T, F, 2});
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index f = 0; f < F; ++f) {
      const double m0 = std::abs(sources[0].bins(t, f));
      const double m1 = std::abs(sources[1].bins(t, f));
      u(t, f, m1 > m0 ? 1 : 0) = 1.0;  // ties stay with the first source
    }
  return u;
}

DcLossResult dc_loss(const nn::Tensor& V, const nn::Tensor& U) {
  if (V.rank() != 3 || U.rank() != 3) throw ShapeError("dc_loss: V and U must be rank 3");
  if (V.dim(0) != U.dim(0) || V.dim(1) != U.dim(1))
    throw ShapeError("dc_loss: V and U disagree on the time-frequency grid");

  const Eigen::Index n = V.dim(0) * V.dim(1);
  nn::ConstMatMap Vm = V.as_matrix();  // n x D
  nn::ConstMatMap Um = U.as_matrix();  // n x S

  const Eigen::MatrixXd VtV = Vm.transpose() * Vm;
  const Eigen::MatrixXd VtU = Vm.transpose() * Um;
  const Eigen::MatrixXd UtU = Um.transpose() * Um;
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));

  DcLossResult res;
  res.loss = (VtV.squaredNorm() - 2.0 * VtU.squaredNorm() + UtU.squaredNorm()) * scale;
  res.grad = nn::Tensor(V.shape());
  res.grad.as_matrix().noalias() = 4.0 * scale * (Vm * VtV - Um * VtU.transpose());
  return res;
}

}  // namespace dcsep
