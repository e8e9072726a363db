#include "dcsep/separator.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <utility>

#include "dcsep/error.hpp"
#include "dcsep/kmeans.hpp"

namespace dcsep::sep {

namespace {

constexpr double kSdrCapDb = 100.0;

// Scatter per-bin cluster labels back onto the T x F grid as indicator masks.
MaskSet labels_to_masks(const std::vector<int>& labels, Eigen::Index t, Eigen::Index f,
                        int sources) {
  MaskSet out;
  out.masks.assign(static_cast<size_t>(sources), Eigen::MatrixXd::Zero(t, f));
  for (Eigen::Index i = 0; i < t * f; ++i)
    out.masks[static_cast<size_t>(labels[static_cast<size_t>(i)])](i / f, i % f) = 1.0;
  return out;
}

double mean2(const std::array<double, 2>& v) { return 0.5 * (v[0] + v[1]); }

}  // namespace

MaskSet make_masks(const nn::Tensor& V, int sources, std::uint64_t seed) {
  if (V.rank() != 3)
    throw ShapeError("make_masks: embeddings must be {T, F, D}, got rank " +
                     std::to_string(V.rank()));
  const Eigen::Index t = V.dim(0);
  const Eigen::Index f = V.dim(1);
  const KMeansResult km = kmeans(V.as_matrix(), sources, seed);
  return labels_to_masks(km.assignments, t, f, sources);
}

MaskSet masks_from_targets(const nn::Tensor& U) {
  if (U.rank() != 3)
    throw ShapeError("masks_from_targets: assignments must be {T, F, S}, got rank " +
                     std::to_string(U.rank()));
  const Eigen::Index t = U.dim(0);
  const Eigen::Index f = U.dim(1);
  const Eigen::Index s = U.dim(2);
  const auto rows = U.as_matrix();  // (T*F) x S, one-hot rows
  std::vector<int> labels(static_cast<size_t>(rows.rows()), 0);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Eigen::Index which = 0;
    rows.row(i).maxCoeff(&which);
    labels[static_cast<size_t>(i)] = static_cast<int>(which);
  }
  return labels_to_masks(labels, t, f, static_cast<int>(s));
}

std::vector<dsp::Spectrogram> apply_masks(const dsp::Spectrogram& y, const MaskSet& m) {
  std::vector<dsp::Spectrogram> out;
  out.reserve(m.masks.size());
  for (const auto& mask : m.masks) {
    if (mask.rows() != y.frames() || mask.cols() != y.num_bins())
      throw ShapeError("apply_masks: mask is " + std::to_string(mask.rows()) + "x" +
                       std::to_string(mask.cols()) + " but spectrogram is " +
                       std::to_string(y.frames()) + "x" + std::to_string(y.num_bins()));
    dsp::Spectrogram xs;
    xs.frame_len = y.frame_len;
    xs.hop = y.hop;
    xs.bins = y.bins.cwiseProduct(mask.cast<std::complex<double>>());
    out.push_back(std::move(xs));
  }
  return out;
}

std::vector<dsp::Waveform> reconstruct(const dsp::Waveform& mixture, const MaskSet& m) {
  const dsp::Spectrogram y = dsp::stft(mixture);
  const Eigen::Index coverage = (y.frames() - 1) * y.hop + y.frame_len;
  std::vector<dsp::Waveform> out;
  out.reserve(m.masks.size());
  for (const dsp::Spectrogram& xs : apply_masks(y, m)) {
    dsp::Waveform w = dsp::istft(xs, coverage);
    w.sample_rate = mixture.sample_rate;
    out.push_back(std::move(w));
  }
  return out;
}

double sdr(const dsp::Waveform& reference, const dsp::Waveform& estimate) {
  if (reference.length() != estimate.length())
    throw ShapeError("sdr: reference has " + std::to_string(reference.length()) +
                     " samples, estimate " + std::to_string(estimate.length()));
  const double rr = reference.samples.matrix().squaredNorm();
  if (rr == 0.0) throw UndefinedReference("sdr: reference signal is identically zero");
  const double alpha = (estimate.samples * reference.samples).sum() / rr;
  const Eigen::ArrayXd target = alpha * reference.samples;
  const double target_energy = target.matrix().squaredNorm();
  const double residual_energy = (estimate.samples - target).matrix().squaredNorm();
  if (target_energy == 0.0) return -kSdrCapDb;
  if (residual_energy == 0.0) return kSdrCapDb;
  const double db = 10.0 * std::log10(target_energy / residual_energy);
  return std::clamp(db, -kSdrCapDb, kSdrCapDb);
}

SeparationScore score_separation(const std::array<dsp::Waveform, 2>& sources,
                                 const std::array<dsp::Waveform, 2>& estimates,
                                 const dsp::Waveform& mixture) {
  for (const auto& s : sources)
    if (s.length() != mixture.length())
      throw ShapeError("score_separation: source/mixture length mismatch");
  for (const auto& e : estimates)
    if (e.length() != mixture.length())
      throw ShapeError("score_separation: estimate/mixture length mismatch");

  const std::array<double, 2> in_order = {sdr(sources[0], estimates[0]),
                                          sdr(sources[1], estimates[1])};
  const std::array<double, 2> swapped = {sdr(sources[0], estimates[1]),
                                         sdr(sources[1], estimates[0])};

  SeparationScore score;
  score.sdr_per_source = mean2(in_order) >= mean2(swapped) ? in_order : swapped;
  score.sdr_mixture_baseline = {sdr(sources[0], mixture), sdr(sources[1], mixture)};
  score.sdr_improvement = mean2(score.sdr_per_source) - mean2(score.sdr_mixture_baseline);
  return score;
}

}  // namespace dcsep::sep
