#include "dcsep/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "dcsep/dc_loss.hpp"
#include "dcsep/error.hpp"
#include "dcsep/stft.hpp"

namespace dcsep::cli {

namespace {

using nlohmann::json;

}  // namespace

json write_dataset(const std::filesystem::path& dir, const std::vector<dsp::MixtureItem>& items,
                   const json& provenance) {
  std::filesystem::create_directories(dir);
  json entries = json::array();
  for (const dsp::MixtureItem& item : items) {
    const std::string mix = item.id + "_mix.wav";
    const std::string s1 = item.id + "_s1.wav";
    const std::string s2 = item.id + "_s2.wav";
    dsp::write_wav(dir / mix, item.mixture);
    dsp::write_wav(dir / s1, item.sources[0]);
    dsp::write_wav(dir / s2, item.sources[1]);
    entries.push_back({{"id", item.id}, {"mixture", mix}, {"sources", {s1, s2}}});
  }
  json manifest = {{"sample_rate", dsp::kSampleRate},
                   {"count", items.size()},
                   {"items", std::move(entries)},
                   {"provenance", provenance}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  return manifest;
}

std::vector<dsp::MixtureItem> load_dataset(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw IoError("no dataset manifest at " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw IoError(manifest_path.string() + " is not valid JSON: " + e.what());
  }
  std::vector<dsp::MixtureItem> items;
  try {
    for (const json& entry : manifest.at("items")) {
      dsp::MixtureItem item;
      item.id = entry.at("id").get<std::string>();
      item.mixture = dsp::read_wav(dir / entry.at("mixture").get<std::string>());
      const json& sources = entry.at("sources");
      if (sources.size() != 2)
        throw IoError("dataset item " + item.id + " does not have exactly two sources");
      item.sources[0] = dsp::read_wav(dir / sources.at(0).get<std::string>());
      item.sources[1] = dsp::read_wav(dir / sources.at(1).get<std::string>());
      items.push_back(std::move(item));
    }
  } catch (const json::exception& e) {
    throw IoError(manifest_path.string() + " is malformed: " + e.what());
  }
  return items;
}

void split_items(std::vector<dsp::MixtureItem> items, double val_fraction, std::uint64_t seed,
                 std::vector<dsp::MixtureItem>& train, std::vector<dsp::MixtureItem>& val) {
  train.clear();
  val.clear();
  const std::size_t n = items.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  if (val_fraction > 0.0 && n_val == 0 && n > 1) n_val = 1;
  if (n_val >= n && n > 0) n_val = n - 1;  // never starve the training side

  for (std::size_t k = 0; k < n; ++k) {
    dsp::MixtureItem& item = items[order[k]];
    (k < n_val ? val : train).push_back(std::move(item));
  }
}

trainer::DataItem prepare_item(const dsp::MixtureItem& item, const dsp::Normalizer& n) {
  const dsp::Spectrogram mix = dsp::stft(item.mixture);
  trainer::DataItem out;
  out.features = dsp::log_features(mix, n);
  out.targets = make_targets({dsp::stft(item.sources[0]), dsp::stft(item.sources[1])});
  return out;
}

Prepared prepare(const std::vector<dsp::MixtureItem>& train_items,
                 const std::vector<dsp::MixtureItem>& val_items) {
  std::vector<dsp::Spectrogram> train_specs;
  train_specs.reserve(train_items.size());
  for (const dsp::MixtureItem& item : train_items) train_specs.push_back(dsp::stft(item.mixture));

  Prepared p;
  p.normalizer = dsp::fit_normalizer(train_specs);
  for (const dsp::MixtureItem& item : train_items) p.train.push_back(prepare_item(item, p.normalizer));
  for (const dsp::MixtureItem& item : val_items) p.val.push_back(prepare_item(item, p.normalizer));
  return p;
}

json normalizer_to_json(const dsp::Normalizer& n) {
  return {{"mean", std::vector<double>(n.mean.data(), n.mean.data() + n.mean.size())},
          {"std", std::vector<double>(n.std.data(), n.std.data() + n.std.size())}};
}

dsp::Normalizer normalizer_from_json(const json& j) {
  dsp::Normalizer n;
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto std_ = j.at("std").get<std::vector<double>>();
  if (mean.size() != std_.size()) throw InvalidConfig("normalizer mean/std length mismatch");
  n.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  n.std = Eigen::Map<const Eigen::VectorXd>(std_.data(), static_cast<Eigen::Index>(std_.size()));
  return n;
}

}  // namespace dcsep::cli
