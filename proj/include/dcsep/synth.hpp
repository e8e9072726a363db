#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dcsep/wav.hpp"

namespace dcsep::dsp {

// Configuration for the synthetic two-speaker corpus. When wav_dir is set,
// sources are drawn from user-supplied mono 8 kHz WAV files instead of the
// built-in pseudo-speakers; subdirectories spk1/ and spk2/ split the pool
// into the two source families (otherwise the sorted file list is halved).
struct SynthConfig {
  int num_mixtures = 0;
  double min_duration_s = 1.5;
  double max_duration_s = 3.0;
  std::string wav_dir;
};

struct MixtureItem {
  std::string id;
  Waveform mixture;
  std::array<Waveform, 2> sources;
};

// Deterministic given (cfg, seed). Source samples are quantized to the
// 16-bit grid before mixing, so mixture == sources[0] + sources[1] holds
// exactly, in memory and after a WAV round trip.
//
// The two built-in families are harmonic-plus-noise pseudo-speakers with
// disjoint fundamental ranges and distinct spectral envelopes: family 0 is
// a low-pitched voice with energy concentrated under ~1 kHz, family 1 a
// higher-pitched voice with a bright formant around 2 kHz.
std::vector<MixtureItem> synth_corpus(const SynthConfig& cfg, uint64_t seed);

}  // namespace dcsep::dsp
