#pragma once

#include <Eigen/Core>

#include <vector>

#include "dcsep/stft.hpp"

namespace dcsep::dsp {

// Normalized decimal log-magnitude features, frames as rows (T x F).
using FeatureSeq = Eigen::MatrixXd;

// Guards log10 of silent bins.
constexpr double kLogEps = 1e-10;

// Per-frequency statistics of the unnormalized log-magnitude, fitted over a
// training corpus.
struct Normalizer {
  Eigen::VectorXd mean;  // length F
  Eigen::VectorXd std;   // length F, floored at 1e-8

  static Normalizer identity(Eigen::Index num_bins);
};

// value(t,f) = (log10(|bins(t,f)| + eps) - mean[f]) / std[f]
FeatureSeq log_features(const Spectrogram& s, const Normalizer& n);

// Population mean/std per frequency bin over all frames of all items.
// Throws EmptyCorpus when the corpus has no spectrograms.
Normalizer fit_normalizer(const std::vector<Spectrogram>& corpus);

}  // namespace dcsep::dsp
