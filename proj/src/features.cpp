#include "dcsep/features.hpp"

#include <cmath>

#include "dcsep/error.hpp"

namespace dcsep::dsp {

Normalizer Normalizer::identity(Eigen::Index num_bins) {
  Normalizer n;
  n.mean = Eigen::VectorXd::Zero(num_bins);
  n.std = Eigen::VectorXd::Ones(num_bins);
  return n;
}

FeatureSeq log_features(const Spectrogram& s, const Normalizer& n) {
  if (n.mean.size() != s.num_bins()) throw ShapeError("normalizer bin count mismatch");
  FeatureSeq out(s.frames(), s.num_bins());
  for (Eigen::Index t = 0; t < s.frames(); ++t) {
    for (Eigen::Index f = 0; f < s.num_bins(); ++f) {
      double lm = std::log10(std::abs(s.bins(t, f)) + kLogEps);
      out(t, f) = (lm - n.mean[f]) / n.std[f];
    }
  }
  return out;
}

Normalizer fit_normalizer(const std::vector<Spectrogram>& corpus) {
  if (corpus.empty()) throw EmptyCorpus("normalizer fitted on empty corpus");
  const Eigen::Index num_bins = corpus.front().num_bins();

  // Welford accumulation per frequency bin.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(num_bins);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(num_bins);
  long count = 0;
  for (const Spectrogram& s : corpus) {
    if (s.num_bins() != num_bins) throw ShapeError("corpus spectrograms disagree on bin count");
    for (Eigen::Index t = 0; t < s.frames(); ++t) {
      ++count;
      for (Eigen::Index f = 0; f < num_bins; ++f) {
        double lm = std::log10(std::abs(s.bins(t, f)) + kLogEps);
        double d = lm - mean[f];
        mean[f] += d / static_cast<double>(count);
        m2[f] += d * (lm - mean[f]);
      }
    }
  }
  if (count == 0) throw EmptyCorpus("normalizer corpus has no frames");

  Normalizer n;
  n.mean = mean;
  n.std = (m2 / static_cast<double>(count)).cwiseSqrt().cwiseMax(1e-8);
  return n;
}

}  // namespace dcsep::dsp
