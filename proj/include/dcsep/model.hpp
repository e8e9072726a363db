#pragma once

#include <cstdint>
#include <vector>

#include "dcsep/graph.hpp"
#include "dcsep/hyperparams.hpp"

namespace dcsep::model {

struct ConvSpec {
  Eigen::Index in_ch = 0;
  Eigen::Index out_ch = 0;
  Eigen::Index kt = 1;
  Eigen::Index kf = 1;
  // Encoder: pooling applied after this conv. Decoder: pooling undone
  // before this conv (mirrors the matching encoder layer).
  int pool_t = 1;
  int pool_f = 1;
};

// A fully resolved architecture: every width and kernel extent made
// concrete, so building and parameter counting need no further policy.
struct ModelSpec {
  std::vector<ConvSpec> encoder;
  std::vector<ConvSpec> decoder;
  Upsampling upsampling = Upsampling::None;
  std::vector<Eigen::Index> lstm_widths;
  LstmDirection lstm_direction = LstmDirection::Bi;
  // Head style actually used: pure-LSTM models always map whole frames
  // (per-frame head), so this is Flattening whenever the CNN is absent.
  Concat concat = Concat::Broadcast;
  std::vector<Eigen::Index> fc_widths;
  Eigen::Index F = 129;
  Eigen::Index D = 20;
  Eigen::Index S = 2;

  bool has_cnn() const { return !encoder.empty(); }
  bool has_lstm() const { return !lstm_widths.empty(); }
  // Width of the vector entering the fully connected stack.
  Eigen::Index head_in_dim() const;
  // D for a per-bin head (broadcast), F*D for a per-frame head.
  Eigen::Index head_out_dim() const;
  Eigen::Index lstm_out_width() const;
};

struct ParamPartition {
  long long cnn = 0;
  long long lstm = 0;
  long long fc = 0;
  long long total = 0;
};

// Turns a hyperparameter point into concrete layer shapes. Geometric
// width progressions round half away from zero and floor at 1; kernel
// extents shrink by their decay factor at every pooling event on that axis.
ModelSpec resolve(const HyperParams& hp, Eigen::Index F = 129, Eigen::Index D = 20,
                  Eigen::Index S = 2);

// Exact trainable-parameter counts: conv (kt*kf*Cin + 1)*Cout, dense
// (in + 1)*out, LSTM 4*((in + N)*N + N) per direction.
ParamPartition count_params(const ModelSpec& spec);

struct BuiltModel {
  nn::Graph graph;
  nn::NodeId input = nn::kNoNode;   // set a {T, F} feature tensor here
  nn::NodeId output = nn::kNoNode;  // {T, F, D} unit-norm embeddings
};

// Instantiates the graph with fresh uniform(+-1/sqrt(fan_in)) weights.
BuiltModel build(const ModelSpec& spec, std::uint64_t seed);

}  // namespace dcsep::model
