#include "dcsep/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>

#include "dcsep/adam.hpp"
#include "dcsep/dc_loss.hpp"
#include "dcsep/error.hpp"

namespace dcsep::trainer {

namespace {

nn::Tensor to_tensor(const Eigen::MatrixXd& features) {
  nn::Tensor t({features.rows(), features.cols()});
  t.as_matrix() = features;
  return t;
}

void check_items(const DataSet& data, const model::ModelSpec& spec, const std::string& which) {
  for (const DataItem& item : data) {
    if (item.features.rows() < 1 || item.features.cols() != spec.F)
      throw ShapeError("train: " + which + " features must be T x " + std::to_string(spec.F));
    if (item.targets.rank() != 3 || item.targets.dim(0) != item.features.rows() ||
        item.targets.dim(1) != spec.F || item.targets.dim(2) != spec.S)
      throw ShapeError("train: " + which + " targets do not match their features");
  }
}

void check_config(const TrainConfig& cfg) {
  if (cfg.curriculum.empty()) throw ConfigError("train: curriculum has no stages");
  for (const TrainStage& s : cfg.curriculum) {
    if (s.epochs < 1) throw ConfigError("train: every stage needs at least one epoch");
    if (s.segment_frames < 0) throw ConfigError("train: negative segment length");
  }
  if (cfg.noise_std < 0.0) throw ConfigError("train: noise_std must be non-negative");
  if (cfg.lr < 0.0) throw ConfigError("train: learning rate must be non-negative");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
  if (cfg.patience < 1) throw ConfigError("train: patience must be at least 1");
  if (cfg.abort_threshold <= 0.0) throw ConfigError("train: abort_threshold must be positive");
}

// A segment drawn for one presentation: item index plus start frame, or the
// whole utterance when start < 0.
struct Segment {
  int item = 0;
  Eigen::Index start = -1;
  Eigen::Index frames = 0;
};

}  // namespace

double validate(model::BuiltModel& m, const DataSet& data) {
  if (data.empty()) throw EmptyCorpus("validate: dataset is empty");
  double total = 0.0;
  for (const DataItem& item : data) {
    m.graph.set_value(m.input, to_tensor(item.features));
    m.graph.forward();
    total += dc_loss(m.graph.value(m.output), item.targets).loss;
  }
  return total / static_cast<double>(data.size());
}

TrainResult train(const model::ModelSpec& spec, const DataSet& train_data,
                  const DataSet& val_data, const TrainConfig& cfg) {
  check_config(cfg);
  if (train_data.empty()) throw EmptyCorpus("train: training set is empty");
  if (val_data.empty()) throw EmptyCorpus("train: validation set is empty");
  check_items(train_data, spec, "training");
  check_items(val_data, spec, "validation");

  const auto t0 = std::chrono::steady_clock::now();

  TrainResult out;
  out.model = model::build(spec, cfg.seed);
  nn::Graph& g = out.model.graph;
  TrainReport& rep = out.report;

  nn::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  nn::Adam adam(adam_cfg);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.noise_std > 0.0 ? cfg.noise_std : 1.0);

  double best_val = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;
  std::vector<nn::Tensor> best_weights;
  const auto snapshot = [&] {
    best_weights.clear();
    for (nn::NodeId p : g.parameters()) best_weights.push_back(g.value(p));
  };

  bool stop = false;
  int epoch_index = 0;
  try {
    for (size_t si = 0; si < cfg.curriculum.size() && !stop; ++si) {
      const TrainStage& stage = cfg.curriculum[si];
      rep.stage_start_epochs.push_back(epoch_index);

      for (int e = 0; e < stage.epochs && !stop; ++e, ++epoch_index) {
        // One segment per utterance per epoch, presented in random order.
        std::vector<Segment> segments;
        segments.reserve(train_data.size());
        for (int i = 0; i < static_cast<int>(train_data.size()); ++i) {
          const Eigen::Index frames = train_data[static_cast<size_t>(i)].features.rows();
          const Eigen::Index want = stage.segment_frames;
          if (want == kFullUtterance || frames <= want) {
            segments.push_back({i, -1, frames});
          } else {
            std::uniform_int_distribution<Eigen::Index> pick(0, frames - want);
            segments.push_back({i, pick(rng), want});
          }
        }
        std::shuffle(segments.begin(), segments.end(), rng);

        double epoch_loss = 0.0;
        Eigen::Index presented = 0;
        for (size_t b = 0; b < segments.size(); b += static_cast<size_t>(cfg.batch_size)) {
          const size_t b_end =
              std::min(b + static_cast<size_t>(cfg.batch_size), segments.size());
          g.zero_param_grads();
          const double grad_scale = 1.0 / static_cast<double>(b_end - b);

          for (size_t s = b; s < b_end; ++s) {
            const Segment& seg = segments[s];
            const DataItem& item = train_data[static_cast<size_t>(seg.item)];

            Eigen::MatrixXd feats =
                seg.start < 0 ? item.features : item.features.middleRows(seg.start, seg.frames);
            if (cfg.noise_std > 0.0)
              for (Eigen::Index i = 0; i < feats.size(); ++i) feats.data()[i] += noise(rng);

            nn::Tensor targets =
                seg.start < 0
                    ? item.targets
                    : nn::Tensor::from({seg.frames, spec.F, spec.S},
                                       item.targets.array().segment(
                                           seg.start * spec.F * spec.S,
                                           seg.frames * spec.F * spec.S));

            g.set_value(out.model.input, to_tensor(feats));
            g.forward();
            DcLossResult r = dc_loss(g.value(out.model.output), targets);
            if (!std::isfinite(r.loss))
              throw DivergedError("train: non-finite training loss at epoch " +
                                  std::to_string(epoch_index));
            r.grad.array() *= grad_scale;
            g.backward(out.model.output, r.grad);
            epoch_loss += r.loss;
            ++presented;
          }
          adam.step(g);
        }
        rep.train_curve.push_back(epoch_loss / static_cast<double>(presented));

        const double val = validate(out.model, val_data);
        if (!std::isfinite(val))
          throw DivergedError("train: non-finite validation loss at epoch " +
                              std::to_string(epoch_index));
        rep.val_curve.push_back(val);

        if (val < best_val) {
          best_val = val;
          epochs_since_best = 0;
          snapshot();
        } else {
          ++epochs_since_best;
        }
        if (epochs_since_best >= cfg.patience) {
          rep.stopped_early = true;
          stop = true;
        }
      }

      // A run that is still above the abort threshold after the first stage,
      // with no improvement from its last epoch, is not worth continuing.
      if (si == 0 && best_val > cfg.abort_threshold && epochs_since_best > 0) {
        rep.aborted = true;
        stop = true;
      }
    }
  } catch (const DivergedError&) {
    rep.aborted = true;
  }

  rep.best_val = best_val;
  rep.reported_loss = rep.aborted ? cfg.abort_threshold : best_val;
  if (!best_weights.empty()) {
    const std::vector<nn::NodeId>& params = g.parameters();
    for (size_t i = 0; i < params.size(); ++i)
      g.set_value(params[i], std::move(best_weights[i]));
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace dcsep::trainer
