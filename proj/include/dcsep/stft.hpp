#pragma once

#include <Eigen/Core>

#include <complex>

#include "dcsep/wav.hpp"

namespace dcsep::dsp {

// 32 ms frames with an 8 ms hop at 8 kHz, no FFT zero padding.
constexpr Eigen::Index kFrameLen = 256;
constexpr Eigen::Index kHop = 64;
constexpr Eigen::Index kBins = kFrameLen / 2 + 1;  // 129

// Complex time-frequency grid, frames as rows.
struct Spectrogram {
  Eigen::MatrixXcd bins;  // T x F
  Eigen::Index frame_len = kFrameLen;
  Eigen::Index hop = kHop;

  Eigen::Index frames() const { return bins.rows(); }
  Eigen::Index num_bins() const { return bins.cols(); }
};

// Square-root Hann analysis window, periodic so that overlap-add with a
// matching synthesis window is constant at 75% overlap.
Eigen::ArrayXd sqrt_hann(Eigen::Index n);

// Frame count: floor((len - frame_len) / hop) + 1. Throws InputTooShort for
// signals under one frame.
Spectrogram stft(const Waveform& w);

// Overlap-add synthesis with the matching sqrt-Hann window; the accumulated
// squared-window envelope is divided out so interior samples round-trip.
// Output is truncated or zero-padded to out_len.
Waveform istft(const Spectrogram& s, Eigen::Index out_len);

}  // namespace dcsep::dsp
