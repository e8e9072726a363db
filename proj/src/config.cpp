#include "dcsep/config.hpp"

#include <fstream>

#include "dcsep/error.hpp"

namespace dcsep::cli {

namespace {

using nlohmann::json;

const json* section(const json& j, const char* name) {
  if (!j.contains(name)) return nullptr;
  const json& s = j.at(name);
  if (!s.is_object()) throw InvalidConfig(std::string("'") + name + "' must be an object");
  return &s;
}

DataSection parse_data(const json& j) {
  DataSection d;
  const json* s = section(j, "data");
  if (!s) return d;
  if (s->contains("dataset")) d.dataset = s->at("dataset").get<std::string>();
  if (s->contains("synth")) {
    const json& sy = s->at("synth");
    dsp::SynthConfig sc;
    sc.num_mixtures = sy.value("num_mixtures", sc.num_mixtures);
    sc.min_duration_s = sy.value("min_duration_s", sc.min_duration_s);
    sc.max_duration_s = sy.value("max_duration_s", sc.max_duration_s);
    sc.wav_dir = sy.value("wav_dir", sc.wav_dir);
    d.synth = sc;
  }
  if (!d.dataset.empty() && d.synth)
    throw InvalidConfig("data: set either 'dataset' or 'synth', not both");
  if (s->contains("val_dataset")) d.val_dataset = s->at("val_dataset").get<std::string>();
  d.val_fraction = s->value("val_fraction", d.val_fraction);
  if (d.val_fraction < 0.0 || d.val_fraction >= 1.0)
    throw InvalidConfig("data.val_fraction must lie in [0, 1)");
  return d;
}

ModelSection parse_model(const json& j) {
  ModelSection m;
  const json* s = section(j, "model");
  if (!s) return m;
  m.embedding_dim = s->value("embedding_dim", static_cast<long long>(m.embedding_dim));
  if (m.embedding_dim < 1) throw InvalidConfig("model.embedding_dim must be positive");
  m.search = s->value("search", false);
  if (s->contains("hyperparams") && !s->at("hyperparams").is_null())
    m.hyperparams = model::hyperparams_from_json(s->at("hyperparams"));
  if (m.search && m.hyperparams)
    throw InvalidConfig("model: 'hyperparams' and 'search' are mutually exclusive");
  return m;
}

trainer::TrainConfig parse_train(const json& j) {
  trainer::TrainConfig t;
  const json* s = section(j, "train");
  if (!s) return t;
  if (s->contains("curriculum")) {
    t.curriculum.clear();
    for (const json& st : s->at("curriculum")) {
      if (!st.is_array() || st.size() != 2)
        throw InvalidConfig("train.curriculum entries are [segment_frames, epochs] pairs");
      t.curriculum.push_back({st.at(0).get<Eigen::Index>(), st.at(1).get<int>()});
    }
  }
  t.noise_std = s->value("noise_std", t.noise_std);
  t.lr = s->value("lr", t.lr);
  t.batch_size = s->value("batch_size", t.batch_size);
  t.patience = s->value("patience", t.patience);
  t.abort_threshold = s->value("abort_threshold", t.abort_threshold);
  return t;
}

hpo::AcqConfig parse_acq(const json& j) {
  hpo::AcqConfig a;
  if (j.contains("kind")) {
    const std::string k = j.at("kind").get<std::string>();
    if (k == "ei" || k == "expected_improvement")
      a.kind = hpo::AcqKind::ExpectedImprovement;
    else if (k == "pi" || k == "probability_of_improvement")
      a.kind = hpo::AcqKind::ProbabilityOfImprovement;
    else
      throw InvalidConfig("acquisition.kind must be ei or pi, got '" + k + "'");
  }
  a.xi = j.value("xi", a.xi);
  if (a.xi < 0.0) throw InvalidConfig("acquisition.xi must be non-negative");
  a.restarts = j.value("restarts", a.restarts);
  if (a.restarts < 1) throw InvalidConfig("acquisition.restarts must be at least 1");
  return a;
}

HpoSection parse_hpo(const json& j) {
  HpoSection h;
  const json* s = section(j, "hpo");
  if (!s) return h;
  h.n_init = s->value("n_init", h.n_init);
  h.n_iter = s->value("n_iter", h.n_iter);
  if (s->contains("budget")) {
    const json& b = s->at("budget");
    h.min_params = b.value("min_params", h.min_params);
    h.max_params = b.value("max_params", h.max_params);
    if (h.min_params > h.max_params) throw InvalidConfig("hpo.budget window is empty");
  }
  if (s->contains("acquisition")) h.acq = parse_acq(s->at("acquisition"));
  h.eval_sdr = s->value("eval_sdr", h.eval_sdr);
  return h;
}

}  // namespace

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw InvalidConfig("--set expects section.key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;  // unquoted strings are the common case on a shell line
  }

  json* cur = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key =
        path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw InvalidConfig("--set path has an empty segment: '" + path + "'");
    if (dot == std::string::npos) {
      (*cur)[key] = std::move(value);
      return;
    }
    json& next = (*cur)[key];
    if (!next.is_object()) next = json::object();
    cur = &next;
    start = dot + 1;
  }
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidConfig("experiment config must be a JSON object");
  ExperimentConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir.string());
  cfg.data = parse_data(j);
  cfg.model = parse_model(j);
  cfg.train = parse_train(j);
  cfg.hpo = parse_hpo(j);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  if (!std::filesystem::exists(path))
    throw ConfigError("config file not found: " + path.string());
  std::ifstream in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  for (const std::string& assignment : overrides) apply_override(j, assignment);
  return config_from_json(j);
}

}  // namespace dcsep::cli
