#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcsep/acquisition.hpp"
#include "dcsep/hyperparams.hpp"
#include "dcsep/synth.hpp"
#include "dcsep/trainer.hpp"

namespace dcsep::cli {

// Where a command gets its audio. Exactly one of `dataset` (a directory
// written by the synth command) or `synth` (generate in memory) may be set.
struct DataSection {
  std::filesystem::path dataset;
  std::optional<dsp::SynthConfig> synth;
  // Held-out validation set; when absent, `val_fraction` of the training
  // items is split off deterministically.
  std::filesystem::path val_dataset;
  double val_fraction = 0.2;
};

// Either one fixed architecture or search mode, never both.
struct ModelSection {
  std::optional<model::HyperParams> hyperparams;
  bool search = false;
  Eigen::Index embedding_dim = 20;
};

struct HpoSection {
  int n_init = 10;
  int n_iter = 40;
  long long min_params = 0;
  long long max_params = std::numeric_limits<long long>::max();
  hpo::AcqConfig acq;
  // Score each trained trial's SDR improvement on the validation items and
  // record it in the ledger (slower, but fills the report's SDR column).
  bool eval_sdr = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "runs/default";
  DataSection data;
  ModelSection model;
  trainer::TrainConfig train;  // its seed field is ignored; the global seed wins
  HpoSection hpo;
};

// Applies one `section.key=value` assignment to a JSON tree, creating
// intermediate objects as needed. The value is parsed as JSON when it is
// valid JSON (numbers, booleans, arrays, quoted strings) and treated as a
// plain string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Throws InvalidConfig on malformed or contradictory settings.
ExperimentConfig config_from_json(const nlohmann::json& j);

// Reads the file, applies --set overrides in order, then parses.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides);

}  // namespace dcsep::cli
