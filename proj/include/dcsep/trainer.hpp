#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "dcsep/model.hpp"
#include "dcsep/tensor.hpp"

namespace dcsep::trainer {

// Stage marker: train on whole utterances instead of fixed-length segments.
constexpr Eigen::Index kFullUtterance = 0;

struct TrainStage {
  Eigen::Index segment_frames = kFullUtterance;
  int epochs = 0;
};

// One utterance prepared for training: normalized log-magnitude features
// (T x F) and the one-hot dominant-source field {T, F, S}.
struct DataItem {
  Eigen::MatrixXd features;
  nn::Tensor targets;
};

using DataSet = std::vector<DataItem>;

struct TrainConfig {
  // Short segments first, whole utterances last. Utterances shorter than a
  // stage's segment length are presented whole.
  std::vector<TrainStage> curriculum = {{100, 5}, {500, 5}, {kFullUtterance, 10}};
  double noise_std = 0.2;  // stddev of Gaussian noise on training features
  double lr = 1e-3;
  int batch_size = 8;  // segments per optimizer step, gradients averaged
  int patience = 5;    // epochs without validation improvement before stopping
  double abort_threshold = 0.17;
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> train_curve;      // mean training loss per epoch
  std::vector<double> val_curve;        // validation loss per epoch
  std::vector<int> stage_start_epochs;  // epoch index at which each stage began
  double best_val = 0.0;                // min of val_curve (+inf if none recorded)
  // What a hyperparameter search should observe: best_val for completed
  // runs, exactly abort_threshold for aborted ones.
  double reported_loss = 0.0;
  bool stopped_early = false;
  bool aborted = false;
  double wall_seconds = 0.0;
};

struct TrainResult {
  model::BuiltModel model;  // weights restored to the best validation epoch
  TrainReport report;
};

// Mean clustering loss over the dataset, noise-free inputs. Pure: repeated
// calls return the same value. Throws EmptyCorpus on an empty dataset.
double validate(model::BuiltModel& m, const DataSet& data);

// Builds the model and optimizes the clustering loss with Adam, stage by
// stage; later stages continue from earlier weights and optimizer state.
// Per presentation, fresh zero-mean Gaussian noise is added to the input
// features. Stops early when validation fails to improve for `patience`
// consecutive epochs. At the end of the first stage, a run whose best
// validation loss exceeds abort_threshold and whose last epoch brought no
// new best is marked aborted and stops; a non-finite loss aborts likewise.
// The trajectory is fully determined by (cfg, data).
TrainResult train(const model::ModelSpec& spec, const DataSet& train_data,
                  const DataSet& val_data, const TrainConfig& cfg);

}  // namespace dcsep::trainer
