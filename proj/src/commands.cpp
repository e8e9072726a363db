#include "dcsep/commands.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dcsep/checkpoint.hpp"
#include "dcsep/corpus.hpp"
#include "dcsep/dc_loss.hpp"
#include "dcsep/error.hpp"
#include "dcsep/model.hpp"
#include "dcsep/separator.hpp"
#include "dcsep/stft.hpp"
#include "dcsep/trainer.hpp"

namespace dcsep::cli {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_num(double v) { return std::isfinite(v) ? fmt(v) : std::string(); }

// Walks `extra` along `path`; nullptr when any key is missing or null.
const json* find_path(const json& extra, std::initializer_list<const char*> path) {
  const json* v = &extra;
  for (const char* key : path) {
    if (!v->is_object()) return nullptr;
    auto it = v->find(key);
    if (it == v->end() || it->is_null()) return nullptr;
    v = &*it;
  }
  return v;
}

// Renders the leaf at `path` as a CSV cell; absent values become empty.
std::string cell(const json& extra, std::initializer_list<const char*> path) {
  const json* v = find_path(extra, path);
  if (!v) return {};
  if (v->is_string()) return v->get<std::string>();
  if (v->is_number_integer()) return std::to_string(v->get<long long>());
  if (v->is_number()) return fmt(v->get<double>());
  if (v->is_boolean()) return v->get<bool>() ? "1" : "0";
  return {};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

nn::Tensor to_tensor(const Eigen::MatrixXd& features) {
  nn::Tensor t({features.rows(), features.cols()});
  t.as_matrix() = features;
  return t;
}

dsp::Waveform head(const dsp::Waveform& w, Eigen::Index n) {
  return {w.samples.head(n), w.sample_rate};
}

std::vector<dsp::MixtureItem> load_items(const ExperimentConfig& cfg) {
  if (cfg.data.synth) return dsp::synth_corpus(*cfg.data.synth, cfg.seed);
  if (cfg.data.dataset.empty()) throw InvalidConfig("data section needs 'dataset' or 'synth'");
  return load_dataset(cfg.data.dataset);
}

void train_val_items(const ExperimentConfig& cfg, std::vector<dsp::MixtureItem>& train,
                     std::vector<dsp::MixtureItem>& val) {
  std::vector<dsp::MixtureItem> items = load_items(cfg);
  if (!cfg.data.val_dataset.empty()) {
    train = std::move(items);
    val = load_dataset(cfg.data.val_dataset);
  } else {
    split_items(std::move(items), cfg.data.val_fraction, cfg.seed, train, val);
  }
}

// Trim the reference signals to the span the overlap-add reconstruction
// covers, then score. All estimates of one item must agree on length.
sep::SeparationScore score_item(const dsp::MixtureItem& item,
                                const std::array<dsp::Waveform, 2>& estimates) {
  const Eigen::Index n = estimates[0].length();
  if (estimates[1].length() != n)
    throw ShapeError("estimates for item " + item.id + " differ in length");
  if (n > item.mixture.length())
    throw ShapeError("estimates for item " + item.id + " are longer than the mixture");
  return sep::score_separation({head(item.sources[0], n), head(item.sources[1], n)},
                               estimates, head(item.mixture, n));
}

void write_estimates(const std::filesystem::path& dir, const dsp::MixtureItem& item,
                     const sep::MaskSet& masks, json& entries) {
  const std::vector<dsp::Waveform> est = sep::reconstruct(item.mixture, masks);
  json names = json::array();
  for (std::size_t s = 0; s < est.size(); ++s) {
    const std::string name = item.id + "_est" + std::to_string(s + 1) + ".wav";
    dsp::write_wav(dir / name, est[s]);
    names.push_back(name);
  }
  entries.push_back({{"id", item.id}, {"estimates", std::move(names)}});
}

struct GroupSpec {
  std::vector<std::string> values;
  const char* branch;  // partition entry the min_fraction filter reads
};

GroupSpec group_spec(const std::string& group_by) {
  if (group_by == "upsampling") return {{"bypass", "unpooling", "none"}, "cnn"};
  if (group_by == "lstm_direction") return {{"uni", "bi"}, "lstm"};
  if (group_by == "concat") return {{"broadcast", "flattening"}, "cnn"};
  throw ConfigError("cannot group by '" + group_by +
                    "'; expected upsampling, lstm_direction, or concat");
}

}  // namespace

int cmd_synth(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  if (!cfg.data.synth) throw InvalidConfig("synth needs a data.synth section");
  const dsp::SynthConfig& sc = *cfg.data.synth;
  const std::vector<dsp::MixtureItem> items = dsp::synth_corpus(sc, cfg.seed);
  const json provenance = {{"seed", cfg.seed},
                           {"num_mixtures", sc.num_mixtures},
                           {"min_duration_s", sc.min_duration_s},
                           {"max_duration_s", sc.max_duration_s},
                           {"wav_dir", sc.wav_dir}};
  write_dataset(out_dir, items, provenance);
  std::cout << "wrote " << items.size() << " mixtures to " << out_dir.string() << "\n";
  return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
  if (!cfg.model.hyperparams) throw InvalidConfig("train needs model.hyperparams");
  const model::HyperParams& hp = *cfg.model.hyperparams;
  model::validate(hp);

  std::vector<dsp::MixtureItem> train_items, val_items;
  train_val_items(cfg, train_items, val_items);
  const Prepared prep = prepare(train_items, val_items);

  const model::ModelSpec spec = model::resolve(hp, dsp::kBins, cfg.model.embedding_dim, 2);
  const model::ParamPartition part = model::count_params(spec);
  trainer::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  trainer::TrainResult result = trainer::train(spec, prep.train, prep.val, tc);

  std::filesystem::create_directories(cfg.out_dir);
  const json meta = {{"hyperparams", model::to_json(hp)},
                     {"embedding_dim", static_cast<long long>(cfg.model.embedding_dim)},
                     {"sources", 2},
                     {"bins", static_cast<long long>(dsp::kBins)},
                     {"normalizer", normalizer_to_json(prep.normalizer)}};
  nn::save_checkpoint((cfg.out_dir / "model").string(), result.model.graph, meta);

  const trainer::TrainReport& rep = result.report;
  const json report = {{"train_curve", rep.train_curve},
                       {"val_curve", rep.val_curve},
                       {"stage_start_epochs", rep.stage_start_epochs},
                       {"best_val", rep.best_val},
                       {"reported_loss", rep.reported_loss},
                       {"stopped_early", rep.stopped_early},
                       {"aborted", rep.aborted},
                       {"wall_seconds", rep.wall_seconds},
                       {"params", {{"cnn", part.cnn},
                                   {"lstm", part.lstm},
                                   {"fc", part.fc},
                                   {"total", part.total}}}};
  write_text(cfg.out_dir / "train_report.json", report.dump(2) + "\n");

  std::cout << "trained " << part.total << "-parameter model on " << train_items.size()
            << " items; best validation loss " << fmt(rep.best_val)
            << (rep.aborted ? " (aborted)" : "") << "\n"
            << "checkpoint: " << (cfg.out_dir / "model").string() << ".{bin,json}\n";
  return 0;
}

int cmd_separate(const ExperimentConfig& cfg, const SeparateArgs& args) {
  const std::filesystem::path est_dir = args.out.empty() ? cfg.out_dir / "estimates" : args.out;
  const std::vector<dsp::MixtureItem> items =
      args.data.empty() ? load_items(cfg) : load_dataset(args.data);
  std::filesystem::create_directories(est_dir);

  json entries = json::array();
  if (args.ibm) {
    for (const dsp::MixtureItem& item : items) {
      const sep::MaskSet masks = sep::masks_from_targets(
          make_targets({dsp::stft(item.sources[0]), dsp::stft(item.sources[1])}));
      write_estimates(est_dir, item, masks, entries);
    }
  } else {
    const std::filesystem::path stem =
        args.checkpoint.empty() ? cfg.out_dir / "model" : args.checkpoint;
    const json meta = nn::read_checkpoint_meta(stem.string());
    model::HyperParams hp;
    dsp::Normalizer norm;
    Eigen::Index bins = 0, dim = 0;
    int sources = 0;
    try {
      hp = model::hyperparams_from_json(meta.at("hyperparams"));
      norm = normalizer_from_json(meta.at("normalizer"));
      bins = meta.at("bins").get<Eigen::Index>();
      dim = meta.at("embedding_dim").get<Eigen::Index>();
      sources = meta.at("sources").get<int>();
    } catch (const json::exception& e) {
      throw IoError("checkpoint " + stem.string() + ".json is incomplete: " + e.what());
    }
    model::BuiltModel bm = model::build(model::resolve(hp, bins, dim, sources), 0);
    nn::load_checkpoint(stem.string(), bm.graph);

    for (const dsp::MixtureItem& item : items) {
      bm.graph.set_value(bm.input, to_tensor(dsp::log_features(dsp::stft(item.mixture), norm)));
      bm.graph.forward();
      const sep::MaskSet masks = sep::make_masks(bm.graph.value(bm.output), sources, cfg.seed);
      write_estimates(est_dir, item, masks, entries);
    }
  }

  const json index = {{"ibm", args.ibm}, {"count", items.size()}, {"items", std::move(entries)}};
  write_text(est_dir / "estimates.json", index.dump(2) + "\n");
  std::cout << "separated " << items.size() << " mixtures into " << est_dir.string()
            << (args.ibm ? " (oracle binary masks)" : "") << "\n";
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const EvaluateArgs& args) {
  const std::vector<dsp::MixtureItem> items =
      args.data.empty() ? load_items(cfg) : load_dataset(args.data);
  if (items.empty()) throw EmptyCorpus("evaluate: the dataset has no items");
  const std::filesystem::path est_dir =
      args.estimates.empty() ? cfg.out_dir / "estimates" : args.estimates;

  const std::filesystem::path index_path = est_dir / "estimates.json";
  std::ifstream in(index_path);
  if (!in) throw IoError("no estimates index at " + index_path.string());
  json index;
  try {
    in >> index;
  } catch (const json::exception& e) {
    throw IoError(index_path.string() + " is not valid JSON: " + e.what());
  }

  std::map<std::string, std::array<std::filesystem::path, 2>> by_id;
  try {
    for (const json& entry : index.at("items")) {
      const json& est = entry.at("estimates");
      if (est.size() != 2)
        throw IoError("estimates index entry '" + entry.at("id").get<std::string>() +
                      "' does not list exactly two files");
      by_id[entry.at("id").get<std::string>()] = {est_dir / est.at(0).get<std::string>(),
                                                  est_dir / est.at(1).get<std::string>()};
    }
  } catch (const json::exception& e) {
    throw IoError(index_path.string() + " is malformed: " + e.what());
  }

  std::string csv = "utt_id,sdr1,sdr2,baseline,improvement\n";
  double sum_improvement = 0.0;
  for (const dsp::MixtureItem& item : items) {
    const auto found = by_id.find(item.id);
    if (found == by_id.end()) throw IoError("no estimates for item " + item.id);
    const sep::SeparationScore score =
        score_item(item, {dsp::read_wav(found->second[0]), dsp::read_wav(found->second[1])});
    const double baseline =
        0.5 * (score.sdr_mixture_baseline[0] + score.sdr_mixture_baseline[1]);
    csv += item.id + "," + fmt(score.sdr_per_source[0]) + "," + fmt(score.sdr_per_source[1]) +
           "," + fmt(baseline) + "," + fmt(score.sdr_improvement) + "\n";
    sum_improvement += score.sdr_improvement;
  }

  const double mean = sum_improvement / static_cast<double>(items.size());
  const std::filesystem::path out_csv =
      args.out_csv.empty() ? cfg.out_dir / "scores.csv" : args.out_csv;
  write_text(out_csv, csv);
  std::cout << "mean SDR improvement: " << fmt(mean) << " dB over " << items.size()
            << " items\nscores: " << out_csv.string() << "\n";
  return 0;
}

int cmd_hpo(const ExperimentConfig& cfg) {
  if (!cfg.model.search) throw InvalidConfig("hpo needs model.search = true");

  std::vector<dsp::MixtureItem> train_items, val_items;
  train_val_items(cfg, train_items, val_items);
  if (val_items.empty()) throw EmptyCorpus("hpo needs at least one validation item");
  const Prepared prep = prepare(train_items, val_items);

  const Eigen::Index dim = cfg.model.embedding_dim;
  const hpo::ParamSpace space = hpo::make_search_space();
  const hpo::Feasible feasible =
      hpo::budget_feasible(cfg.hpo.min_params, cfg.hpo.max_params, dsp::kBins, dim, 2);

  const bool eval_sdr = cfg.hpo.eval_sdr;
  const auto objective = [&](const std::vector<double>& raw,
                             std::uint64_t seed) -> hpo::Observation {
    model::HyperParams hp = hpo::hp_from_raw(raw);
    model::validate(hp);
    const model::ModelSpec spec = model::resolve(hp, dsp::kBins, dim, 2);
    const model::ParamPartition part = model::count_params(spec);
    trainer::TrainConfig tc = cfg.train;
    tc.seed = seed;
    trainer::TrainResult result = trainer::train(spec, prep.train, prep.val, tc);

    hpo::Observation obs;
    obs.loss = result.report.reported_loss;
    obs.aborted = result.report.aborted;
    obs.extra = {{"hyperparams", model::to_json(hp)},
                 {"partition", {{"cnn", part.cnn},
                                {"lstm", part.lstm},
                                {"fc", part.fc},
                                {"total", part.total}}},
                 {"best_val", result.report.best_val},
                 {"stopped_early", result.report.stopped_early},
                 {"epochs", result.report.val_curve.size()},
                 {"wall_seconds", result.report.wall_seconds}};
    if (eval_sdr && !obs.aborted) {
      double sum = 0.0;
      for (const dsp::MixtureItem& item : val_items) {
        result.model.graph.set_value(
            result.model.input,
            to_tensor(dsp::log_features(dsp::stft(item.mixture), prep.normalizer)));
        result.model.graph.forward();
        const sep::MaskSet masks =
            sep::make_masks(result.model.graph.value(result.model.output), 2, seed);
        const std::vector<dsp::Waveform> est = sep::reconstruct(item.mixture, masks);
        sum += score_item(item, {est[0], est[1]}).sdr_improvement;
      }
      obs.extra["sdr_improvement"] = sum / static_cast<double>(val_items.size());
    }
    return obs;
  };

  std::filesystem::create_directories(cfg.out_dir);
  hpo::BoOptions opt;
  opt.n_init = cfg.hpo.n_init;
  opt.n_iter = cfg.hpo.n_iter;
  // One threshold rules everything above it: the trainer reports aborted
  // runs at it, crashed objectives are recorded at it, and the summary
  // clips at it, so "worse than the gate" is a single flat ceiling.
  opt.failure_loss = cfg.train.abort_threshold;
  opt.acq = cfg.hpo.acq;
  opt.seed = cfg.seed;
  opt.ledger = cfg.out_dir / "ledger.jsonl";

  const std::vector<hpo::TrialRecord> records = hpo::bo_loop(space, objective, feasible, opt);
  write_text(cfg.out_dir / "summary.csv", summary_csv(records, cfg.train.abort_threshold));

  const auto best = std::min_element(
      records.begin(), records.end(),
      [](const hpo::TrialRecord& a, const hpo::TrialRecord& b) { return a.loss < b.loss; });
  std::cout << records.size() << " trials in " << (cfg.out_dir / "ledger.jsonl").string()
            << "\nbest loss " << fmt(best->loss) << " at trial " << best->index
            << "\nsummary: " << (cfg.out_dir / "summary.csv").string() << "\n";
  return 0;
}

std::vector<GroupRow> report_rows(const std::vector<hpo::TrialRecord>& records,
                                  const std::string& group_by, int top_k, double min_fraction) {
  if (top_k < 1) throw ConfigError("report top_k must be at least 1");
  if (min_fraction < 0.0 || min_fraction > 1.0)
    throw ConfigError("report min_fraction must lie in [0, 1]");
  const GroupSpec spec = group_spec(group_by);

  struct Entry {
    double loss = 0.0;
    double sdr = 0.0;
    bool has_sdr = false;
  };
  std::map<std::string, std::vector<Entry>> buckets;

  for (const hpo::TrialRecord& r : records) {
    // Trials that never reached training (no architecture recorded) and
    // trials where the grouped field was inactive are out of scope.
    const json* value = find_path(r.extra, {"hyperparams", group_by.c_str()});
    if (!value || !value->is_string()) continue;
    const json* branch = find_path(r.extra, {"partition", spec.branch});
    const json* total = find_path(r.extra, {"partition", "total"});
    if (!branch || !branch->is_number() || !total || !total->is_number()) continue;
    const double total_params = total->get<double>();
    if (!(total_params > 0.0)) continue;
    if (branch->get<double>() / total_params < min_fraction) continue;

    Entry e;
    e.loss = r.loss;
    const json* sdr = find_path(r.extra, {"sdr_improvement"});
    if (sdr && sdr->is_number()) {
      e.sdr = sdr->get<double>();
      e.has_sdr = true;
    }
    buckets[value->get<std::string>()].push_back(e);
  }

  std::vector<GroupRow> rows;
  for (const std::string& value : spec.values) {
    GroupRow row;
    row.value = value;
    std::vector<Entry>& entries = buckets[value];
    row.qualifying = static_cast<int>(entries.size());
    if (!entries.empty()) {
      std::stable_sort(entries.begin(), entries.end(),
                       [](const Entry& a, const Entry& b) { return a.loss < b.loss; });
      row.averaged = std::min<int>(top_k, row.qualifying);
      double loss_sum = 0.0, sdr_sum = 0.0;
      int sdr_count = 0;
      for (int i = 0; i < row.averaged; ++i) {
        loss_sum += entries[static_cast<std::size_t>(i)].loss;
        if (entries[static_cast<std::size_t>(i)].has_sdr) {
          sdr_sum += entries[static_cast<std::size_t>(i)].sdr;
          ++sdr_count;
        }
      }
      row.mean_loss = loss_sum / row.averaged;
      if (sdr_count > 0) row.mean_sdr = sdr_sum / sdr_count;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_report(const ReportArgs& args) {
  if (!std::filesystem::exists(args.ledger))
    throw IoError("no ledger at " + args.ledger.string());
  const std::vector<hpo::TrialRecord> records = hpo::load_ledger(args.ledger);
  if (records.empty()) throw IoError("ledger " + args.ledger.string() + " has no trials");

  const std::vector<GroupRow> rows =
      report_rows(records, args.group_by, args.top_k, args.min_fraction);
  std::string csv = "field,value,qualifying,averaged,mean_loss,mean_sdr_improvement\n";
  for (const GroupRow& row : rows) {
    csv += args.group_by + "," + row.value + "," + std::to_string(row.qualifying) + "," +
           std::to_string(row.averaged) + "," + csv_num(row.mean_loss) + "," +
           csv_num(row.mean_sdr) + "\n";
  }
  if (args.out_csv.empty()) {
    std::cout << csv;
  } else {
    write_text(args.out_csv, csv);
    std::cout << "wrote " << args.out_csv.string() << "\n";
  }
  return 0;
}

std::string summary_csv(std::vector<hpo::TrialRecord> records, double clip_loss) {
  for (hpo::TrialRecord& r : records) r.loss = std::min(r.loss, clip_loss);
  std::sort(records.begin(), records.end(),
            [](const hpo::TrialRecord& a, const hpo::TrialRecord& b) {
              return a.loss != b.loss ? a.loss < b.loss : a.index < b.index;
            });

  std::string csv =
      "trial,loss,aborted,sdr_improvement,cnn_params,lstm_params,fc_params,total_params,"
      "upsampling,lstm_direction,concat\n";
  for (const hpo::TrialRecord& r : records) {
    csv += std::to_string(r.index) + "," + fmt(r.loss) + "," + (r.aborted ? "1" : "0") + "," +
           cell(r.extra, {"sdr_improvement"}) + "," + cell(r.extra, {"partition", "cnn"}) + "," +
           cell(r.extra, {"partition", "lstm"}) + "," + cell(r.extra, {"partition", "fc"}) + "," +
           cell(r.extra, {"partition", "total"}) + "," +
           cell(r.extra, {"hyperparams", "upsampling"}) + "," +
           cell(r.extra, {"hyperparams", "lstm_direction"}) + "," +
           cell(r.extra, {"hyperparams", "concat"}) + "\n";
  }
  return csv;
}

}  // namespace dcsep::cli
