#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>

namespace dcsep::dsp {

constexpr int kSampleRate = 8000;

// Mono audio signal. All pipelines assume 8 kHz.
struct Waveform {
  Eigen::ArrayXd samples;
  int sample_rate = kSampleRate;

  Eigen::Index length() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Reads a mono 16-bit PCM RIFF/WAVE file. Sample values are scaled to [-1, 1).
Waveform read_wav(const std::filesystem::path& path);

// Writes mono 16-bit PCM at the waveform's sample rate. Samples are clamped
// to [-1, 1) before quantization.
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace dcsep::dsp
