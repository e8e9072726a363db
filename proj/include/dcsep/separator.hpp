#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "dcsep/stft.hpp"
#include "dcsep/tensor.hpp"
#include "dcsep/wav.hpp"

namespace dcsep::sep {

// Binary time-frequency masks, one T x F matrix of {0,1} per source. Every
// bin belongs to exactly one source, so the masks sum to 1 everywhere.
struct MaskSet {
  std::vector<Eigen::MatrixXd> masks;

  int sources() const { return static_cast<int>(masks.size()); }
};

// Cluster the T*F embedding rows of V {T, F, D} into `sources` groups and
// mark each bin's cluster membership. Cluster labels carry no speaker
// identity; scoring resolves the correspondence by permutation search.
// When all embeddings coincide the clusters collapse: the first mask is all
// ones and the remaining masks all zeros.
MaskSet make_masks(const nn::Tensor& V, int sources, std::uint64_t seed);

// Masks selecting each bin's dominant source from the one-hot assignment
// field U {T, F, S} — what a perfect embedding would induce.
MaskSet masks_from_targets(const nn::Tensor& U);

// X_s = mask_s ∘ Y on the complex bins (real and imaginary parts alike).
// Throws ShapeError when a mask grid does not match the spectrogram.
std::vector<dsp::Spectrogram> apply_masks(const dsp::Spectrogram& y, const MaskSet& m);

// stft -> apply_masks -> istft. The estimates cover exactly the sample span
// the analysis frames do, (T-1)*hop + frame_len, which can be shorter than
// the mixture; callers compare against references sliced to the same span.
std::vector<dsp::Waveform> reconstruct(const dsp::Waveform& mixture, const MaskSet& m);

// Scale-invariant signal-to-distortion ratio in dB. The estimate is
// projected onto the reference with a single least-squares coefficient,
//   s = (<e, r> / <r, r>) r,   sdr = 10 log10(|s|^2 / |e - s|^2),
// and the result is capped at +/-100 dB (a perfect estimate has zero
// residual, an orthogonal one zero target energy). Throws UndefinedReference
// when the reference is identically zero, and ShapeError on length mismatch.
double sdr(const dsp::Waveform& reference, const dsp::Waveform& estimate);

struct SeparationScore {
  std::array<double, 2> sdr_per_source{};        // best-permutation SDRs, dB
  std::array<double, 2> sdr_mixture_baseline{};  // sdr(source_s, mixture), dB
  double sdr_improvement = 0.0;                  // mean(per_source) - mean(baseline)
};

// Evaluate both assignments of estimates to the two sources, keep the one
// with the higher mean SDR (ties keep the given order), and report the gain
// over presenting the raw mixture as the estimate for every source.
SeparationScore score_separation(const std::array<dsp::Waveform, 2>& sources,
                                 const std::array<dsp::Waveform, 2>& estimates,
                                 const dsp::Waveform& mixture);

}  // namespace dcsep::sep
