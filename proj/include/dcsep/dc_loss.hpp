#pragma once

#include <vector>

#include "dcsep/stft.hpp"
#include "dcsep/tensor.hpp"

namespace dcsep {

// One-hot dominant-source assignments per time-frequency bin: {T, F, S}
// with exactly one 1 in each trailing row. Magnitude ties go to the lowest
// source index. Only two-source mixtures are supported.
nn::Tensor make_targets(const std::vector<dsp::Spectrogram>& sources);

struct DcLossResult {
  double loss = 0.0;        // || V V' - U U' ||_F^2 / (TF)^2
  nn::Tensor grad;          // d loss / d V, shape {T, F, D}
};

// Affinity-matching clustering loss between embeddings V {T,F,D} and
// assignments U {T,F,S}, evaluated in the factorized form
//   ( ||V'V||^2 - 2 ||V'U||^2 + ||U'U||^2 ) / (TF)^2
// which never materializes the TF x TF affinity matrices. The normalization
// by (TF)^2 makes values comparable across utterance lengths.
DcLossResult dc_loss(const nn::Tensor& V, const nn::Tensor& U);

}  // namespace dcsep
