#include "dcsep/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "dcsep/error.hpp"

namespace dcsep::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

struct FamilyProfile {
  double f0_lo, f0_hi;     // fundamental range, Hz
  double rolloff;          // harmonic amplitude ~ 1/k^rolloff
  double bump_lo, bump_hi; // formant-like emphasis center range, Hz
  double bump_width;       // Hz
  double bump_gain;
};

// Disjoint pitch ranges and opposite spectral tilts keep the families
// separable enough for desk-scale training to converge.
const FamilyProfile kFamilies[2] = {
    {95.0, 150.0, 1.5, 300.0, 550.0, 180.0, 3.0},
    {220.0, 330.0, 0.3, 1700.0, 2600.0, 600.0, 5.0},
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// One voiced/paused "syllable" envelope train covering n samples.
Eigen::ArrayXd syllable_envelope(Eigen::Index n, std::mt19937_64& rng) {
  Eigen::ArrayXd env = Eigen::ArrayXd::Zero(n);
  const Eigen::Index ramp = kSampleRate / 50;  // 20 ms attack/release
  Eigen::Index pos = 0;
  while (pos < n) {
    Eigen::Index voiced = static_cast<Eigen::Index>(uniform(rng, 0.12, 0.30) * kSampleRate);
    Eigen::Index gap = static_cast<Eigen::Index>(uniform(rng, 0.03, 0.10) * kSampleRate);
    double level = uniform(rng, 0.6, 1.0);
    Eigen::Index end = std::min(n, pos + voiced);
    for (Eigen::Index i = pos; i < end; ++i) {
      double a = 1.0;
      if (i - pos < ramp) a = 0.5 - 0.5 * std::cos(kPi * static_cast<double>(i - pos) / ramp);
      if (end - 1 - i < ramp) {
        a = std::min(a, 0.5 - 0.5 * std::cos(kPi * static_cast<double>(end - 1 - i) / ramp));
      }
      env[i] = level * a;
    }
    pos = end + gap;
  }
  return env;
}

Eigen::ArrayXd pseudo_speaker(int family, Eigen::Index n, std::mt19937_64& rng) {
  const FamilyProfile& p = kFamilies[family];
  const double f0_base = uniform(rng, p.f0_lo, p.f0_hi);
  const double drift = uniform(rng, -0.04, 0.04);       // slow pitch slope
  const double vib_rate = uniform(rng, 4.0, 7.0);
  const double vib_depth = uniform(rng, 0.01, 0.03);
  const double vib_phase = uniform(rng, 0.0, 2.0 * kPi);
  const double bump_center = uniform(rng, p.bump_lo, p.bump_hi);

  const double f0_max = f0_base * (1.0 + std::abs(drift) + vib_depth);
  const int harmonics = std::max(1, static_cast<int>(3800.0 / f0_max));

  std::vector<double> amp(static_cast<size_t>(harmonics));
  std::vector<double> phase(static_cast<size_t>(harmonics));
  for (int k = 0; k < harmonics; ++k) {
    double freq = (k + 1) * f0_base;
    double bump = 1.0 + p.bump_gain * std::exp(-0.5 * std::pow((freq - bump_center) / p.bump_width, 2));
    amp[static_cast<size_t>(k)] = std::pow(k + 1.0, -p.rolloff) * bump;
    phase[static_cast<size_t>(k)] = uniform(rng, 0.0, 2.0 * kPi);
  }

  const Eigen::ArrayXd env = syllable_envelope(n, rng);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::ArrayXd out(n);
  double theta = 0.0;  // fundamental phase, harmonics locked to it
  for (Eigen::Index i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / kSampleRate;
    double f0 = f0_base * (1.0 + drift * t + vib_depth * std::sin(2.0 * kPi * vib_rate * t + vib_phase));
    theta += 2.0 * kPi * f0 / kSampleRate;
    double v = 0.0;
    for (int k = 0; k < harmonics; ++k) {
      v += amp[static_cast<size_t>(k)] * std::sin((k + 1) * theta + phase[static_cast<size_t>(k)]);
    }
    out[i] = env[i] * (v + 0.03 * gauss(rng));
  }
  return out;
}

// Snaps samples to the 16-bit PCM grid so later WAV writes are lossless.
void quantize(Eigen::ArrayXd& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double v = std::clamp(x[i], -1.0, 32767.0 / 32768.0);
    x[i] = std::lrint(v * 32768.0) / 32768.0;
  }
}

std::vector<std::filesystem::path> list_wavs(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(dir)) return files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

struct WavPool {
  std::array<std::vector<std::filesystem::path>, 2> families;
};

WavPool load_pool(const std::string& dir) {
  WavPool pool;
  const std::filesystem::path root(dir);
  pool.families[0] = list_wavs(root / "spk1");
  pool.families[1] = list_wavs(root / "spk2");
  if (pool.families[0].empty() || pool.families[1].empty()) {
    auto all = list_wavs(root);
    if (all.size() < 2) throw ConfigError("wav_dir needs at least two wav files: " + dir);
    pool.families[0].assign(all.begin(), all.begin() + static_cast<long>(all.size() / 2));
    pool.families[1].assign(all.begin() + static_cast<long>(all.size() / 2), all.end());
  }
  return pool;
}

Eigen::ArrayXd pool_source(const WavPool& pool, int family, Eigen::Index n, std::mt19937_64& rng) {
  const auto& files = pool.families[static_cast<size_t>(family)];
  const size_t pick = std::uniform_int_distribution<size_t>(0, files.size() - 1)(rng);
  Waveform w = read_wav(files[pick]);
  if (w.sample_rate != kSampleRate) {
    throw ConfigError("source pool wav is not 8 kHz: " + files[pick].string());
  }
  Eigen::ArrayXd out(n);
  if (w.samples.size() >= n) {
    const Eigen::Index start = static_cast<Eigen::Index>(std::uniform_int_distribution<long>(
        0, static_cast<long>(w.samples.size() - n))(rng));
    out = w.samples.segment(start, n);
  } else {
    for (Eigen::Index i = 0; i < n; ++i) out[i] = w.samples[i % w.samples.size()];  // tile short files
  }
  return out;
}

}  // namespace

std::vector<MixtureItem> synth_corpus(const SynthConfig& cfg, uint64_t seed) {
  if (cfg.num_mixtures < 0) throw ConfigError("num_mixtures must be non-negative");
  if (!(cfg.min_duration_s >= 0.1) || !(cfg.max_duration_s >= cfg.min_duration_s) ||
      !(cfg.max_duration_s <= 60.0)) {
    throw ConfigError("mixture durations must satisfy 0.1s <= min <= max <= 60s");
  }

  WavPool pool;
  const bool from_pool = !cfg.wav_dir.empty();
  if (from_pool) pool = load_pool(cfg.wav_dir);

  std::mt19937_64 rng(seed);
  std::vector<MixtureItem> items;
  items.reserve(static_cast<size_t>(cfg.num_mixtures));
  for (int m = 0; m < cfg.num_mixtures; ++m) {
    const double dur = uniform(rng, cfg.min_duration_s, cfg.max_duration_s);
    const Eigen::Index n = static_cast<Eigen::Index>(std::lrint(dur * kSampleRate));

    std::array<Eigen::ArrayXd, 2> src;
    for (int s = 0; s < 2; ++s) {
      src[static_cast<size_t>(s)] =
          from_pool ? pool_source(pool, s, n, rng) : pseudo_speaker(s, n, rng);
      const double rms = std::sqrt(src[static_cast<size_t>(s)].square().mean() + 1e-30);
      const double gain_db = uniform(rng, -2.0, 2.0);
      src[static_cast<size_t>(s)] *= 0.08 * std::pow(10.0, gain_db / 20.0) / std::max(rms, 1e-12);
    }

    // Joint rescale so the integer-domain sum cannot clip, then quantize.
    const double peak = (src[0].abs() + src[1].abs()).maxCoeff();
    if (peak > 0.9) {
      src[0] *= 0.9 / peak;
      src[1] *= 0.9 / peak;
    }
    quantize(src[0]);
    quantize(src[1]);

    MixtureItem item;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "mix_%05d", m);
    item.id = buf;
    item.sources[0].samples = src[0];
    item.sources[1].samples = src[1];
    item.mixture.samples = src[0] + src[1];
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace dcsep::dsp
