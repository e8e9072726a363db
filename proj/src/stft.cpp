#include "dcsep/stft.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numbers>
#include <vector>

#include "dcsep/error.hpp"

namespace dcsep::dsp {

Eigen::ArrayXd sqrt_hann(Eigen::Index n) {
  Eigen::ArrayXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                       static_cast<double>(n));
    w[i] = std::sqrt(hann);
  }
  return w;
}

Spectrogram stft(const Waveform& w) {
  const Eigen::Index len = w.samples.size();
  if (len < kFrameLen) throw InputTooShort("signal shorter than one stft frame");

  const Eigen::Index frames = (len - kFrameLen) / kHop + 1;
  const Eigen::ArrayXd window = sqrt_hann(kFrameLen);

  Spectrogram s;
  s.bins.resize(frames, kBins);

  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<size_t>(kFrameLen));
  std::vector<std::complex<double>> spectrum;
  for (Eigen::Index t = 0; t < frames; ++t) {
    const Eigen::Index start = t * kHop;
    for (Eigen::Index i = 0; i < kFrameLen; ++i) {
      frame[static_cast<size_t>(i)] = w.samples[start + i] * window[i];
    }
    fft.fwd(spectrum, frame);
    for (Eigen::Index f = 0; f < kBins; ++f) s.bins(t, f) = spectrum[static_cast<size_t>(f)];
  }
  return s;
}

Waveform istft(const Spectrogram& s, Eigen::Index out_len) {
  const Eigen::Index frames = s.frames();
  if (s.num_bins() != kBins) throw ShapeError("spectrogram bin count mismatch");
  const Eigen::Index span = (frames - 1) * kHop + kFrameLen;
  if (out_len > span) throw ShapeError("requested istft length exceeds frame span");

  const Eigen::ArrayXd window = sqrt_hann(kFrameLen);

  Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(span);
  Eigen::ArrayXd wsum = Eigen::ArrayXd::Zero(span);

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum(static_cast<size_t>(kFrameLen));
  std::vector<double> frame;
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index f = 0; f < kBins; ++f) spectrum[static_cast<size_t>(f)] = s.bins(t, f);
    for (Eigen::Index f = kBins; f < kFrameLen; ++f) {
      spectrum[static_cast<size_t>(f)] = std::conj(s.bins(t, kFrameLen - f));
    }
    fft.inv(frame, spectrum);
    const Eigen::Index start = t * kHop;
    for (Eigen::Index i = 0; i < kFrameLen; ++i) {
      acc[start + i] += frame[static_cast<size_t>(i)] * window[i];
      wsum[start + i] += window[i] * window[i];
    }
  }

  Waveform out;
  out.samples = Eigen::ArrayXd::Zero(out_len);
  const Eigen::Index n = std::min(out_len, span);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.samples[i] = wsum[i] > 1e-8 ? acc[i] / wsum[i] : 0.0;
  }
  return out;
}

}  // namespace dcsep::dsp
