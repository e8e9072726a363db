#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "dcsep/features.hpp"
#include "dcsep/synth.hpp"
#include "dcsep/trainer.hpp"

namespace dcsep::cli {

// Writes each item's mixture and source WAVs plus a manifest.json into
// `dir` (created if needed) and returns the manifest. `provenance` is
// stored verbatim so a dataset records how it was made. Deterministic:
// identical items and provenance give byte-identical output.
nlohmann::json write_dataset(const std::filesystem::path& dir,
                             const std::vector<dsp::MixtureItem>& items,
                             const nlohmann::json& provenance);

// Reads a dataset directory back into memory. Throws IoError on a missing
// or malformed manifest or missing WAVs.
std::vector<dsp::MixtureItem> load_dataset(const std::filesystem::path& dir);

// Deterministic shuffled split; validation gets round(val_fraction * n)
// items, at least one when the fraction is positive, and never all of them.
void split_items(std::vector<dsp::MixtureItem> items, double val_fraction, std::uint64_t seed,
                 std::vector<dsp::MixtureItem>& train, std::vector<dsp::MixtureItem>& val);

struct Prepared {
  trainer::DataSet train;
  trainer::DataSet val;
  dsp::Normalizer normalizer;  // fitted on the training mixtures only
};

// Turns raw audio into trainer input: normalized log-magnitude features of
// the mixture plus the one-hot dominant-source field from the sources.
Prepared prepare(const std::vector<dsp::MixtureItem>& train_items,
                 const std::vector<dsp::MixtureItem>& val_items);

trainer::DataItem prepare_item(const dsp::MixtureItem& item, const dsp::Normalizer& n);

nlohmann::json normalizer_to_json(const dsp::Normalizer& n);
dsp::Normalizer normalizer_from_json(const nlohmann::json& j);

}  // namespace dcsep::cli
