#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dcsep/tensor.hpp"

namespace dcsep::nn {

using NodeId = int;
constexpr NodeId kNoNode = -1;

// Argmax bookkeeping of one max-pool application: a flat input position per
// output cell plus the pre-pool shape, consumed by unpool / upsample.
struct PoolIndices {
  std::vector<Eigen::Index> argmax;
  std::vector<Eigen::Index> pre_shape;
  int pool_t = 1;
  int pool_f = 1;
};

class Graph;
using OpFn = std::function<void(Graph&, NodeId)>;

struct Node {
  Tensor value;
  Tensor grad;
  std::vector<NodeId> inputs;
  OpFn fwd;  // null for placeholders and parameters
  OpFn bwd;
  bool is_param = false;
  std::string name;
  PoolIndices pool;           // max-pool nodes only
  std::vector<Tensor> saved;  // per-forward intermediates for backward
};

// Topologically ordered tape of tensor operations with reverse-mode
// differentiation. Shapes are dynamic: a graph built once runs forward on
// any sequence length. A graph instance is single-threaded; independent
// instances may run concurrently.
class Graph {
 public:
  NodeId placeholder(std::string name = "x");
  NodeId parameter(std::string name, Tensor init);

  // Stride-1 cross-correlation with "same" zero padding; kernel is
  // {wt, wf, Cin, Cout}, bias {Cout}, input {T, F, Cin}.
  NodeId conv2d(NodeId x, NodeId kernel, NodeId bias);
  NodeId relu(NodeId x);

  // Window max with ceil semantics along time/frequency of a {T, F, C}
  // tensor; extents must be 1 or 2. Ties pick the lowest linear index.
  NodeId maxpool(NodeId x, int pool_t, int pool_f);
  // Places values at the argmax positions recorded by `pool_node`, zeros
  // elsewhere; output takes the recorded pre-pool shape.
  NodeId unpool(NodeId x, NodeId pool_node);
  // Nearest-neighbour upsampling to the pre-pool shape recorded by
  // `pool_node` (each value fills its pooling window).
  NodeId upsample_nn(NodeId x, NodeId pool_node);

  // Concatenation along the trailing axis; leading extents must agree.
  NodeId concat_last(NodeId a, NodeId b);
  // {T,F,C} + {T,N} -> {T,F,C+N}: the per-frame vector is broadcast over F.
  NodeId concat_broadcast(NodeId cnn, NodeId lstm);
  // {T,F,C} + {T,N} -> {T,F*C+N}: frames flattened row-major, then appended.
  NodeId concat_flatten(NodeId cnn, NodeId lstm);

  // y = x W + b applied row-wise; all leading axes are batch. W is
  // {In, Out}, bias {Out}.
  NodeId linear(NodeId x, NodeId weight, NodeId bias);

  // One LSTM direction over {T, Din}: standard gates (sigmoid i/f/o, tanh
  // candidate and cell output), zero initial state. With reverse=true the
  // recurrence runs from the last frame backwards; the output row for time
  // t always holds the state after visiting t.
  NodeId lstm(NodeId x, NodeId w_in, NodeId w_rec, NodeId bias, bool reverse);

  // Divides each trailing D-vector by max(norm, 1e-12); zero stays zero.
  NodeId unit_normalize(NodeId x);

  NodeId expand_dims_last(NodeId x);                          // {..,F} -> {..,F,1}
  NodeId split_last(NodeId x, Eigen::Index f, Eigen::Index d);  // {T,F*D} -> {T,F,D}
  NodeId flatten_frames(NodeId x);                            // {T,F,C} -> {T,F*C}

  void set_value(NodeId id, Tensor v);
  const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  Tensor& grad(NodeId id) { return nodes_[static_cast<size_t>(id)].grad; }
  const Tensor& grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].grad; }

  Node& node(NodeId id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(NodeId id) const { return nodes_[static_cast<size_t>(id)]; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }

  // Recomputes every non-leaf node in insertion order.
  void forward();

  // Reverse sweep from `output`, seeded with d(loss)/d(output). Parameter
  // gradients accumulate across calls (zero them via zero_param_grads);
  // non-parameter gradients are scratch per call.
  void backward(NodeId output, const Tensor& seed);

  void zero_param_grads();
  const std::vector<NodeId>& parameters() const { return params_; }

 private:
  NodeId add_node(Node n);

  std::vector<Node> nodes_;
  std::vector<NodeId> params_;
};

enum class Direction { Uni, Bi };

// Uniform(-bound, bound) initialisation with bound = 1/sqrt(fan_in).
Tensor uniform_init(std::vector<Eigen::Index> shape, Eigen::Index fan_in, std::mt19937_64& rng);

// Creates weights (uniform 1/sqrt(fan_in), forget-gate bias 1) and wires a
// full uni- or bi-directional LSTM layer; output is {T, cells} or
// {T, 2*cells}.
NodeId lstm_layer(Graph& g, NodeId x, Eigen::Index in_dim, Eigen::Index cells, Direction dir,
                  const std::string& prefix, std::mt19937_64& rng);

// Dense layer helper: creates {in, out} weights plus bias and applies linear.
NodeId dense_layer(Graph& g, NodeId x, Eigen::Index in, Eigen::Index out,
                   const std::string& prefix, std::mt19937_64& rng);

// Convolution layer helper with {wt, wf, in_ch, out_ch} weights.
NodeId conv_layer(Graph& g, NodeId x, Eigen::Index wt, Eigen::Index wf, Eigen::Index in_ch,
                  Eigen::Index out_ch, const std::string& prefix, std::mt19937_64& rng);

}  // namespace dcsep::nn
