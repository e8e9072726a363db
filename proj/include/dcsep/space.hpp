#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dcsep/hyperparams.hpp"

namespace dcsep::hpo {

enum class DimKind { Real, Integer, Categorical };

// One raw dimension of a search space. Real and integer dimensions carry
// inclusive bounds; categorical ones carry their choice labels and occupy
// one encoded coordinate per choice (one-hot).
struct Dim {
  DimKind kind = DimKind::Real;
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::string> choices;

  int width() const {
    return kind == DimKind::Categorical ? static_cast<int>(choices.size()) : 1;
  }
};

// Mixed real/integer/categorical box, with a bijection-up-to-rounding
// between raw configurations and the unit cube the surrogate model and the
// proposal optimizer operate in.
//
// A raw configuration is one double per dimension: the value itself for
// real and integer dimensions, the choice index for categorical ones.
//
// Encoding maps reals and integers to [0, 1] by their bounds and expands
// categoricals to one-hot blocks. Dimensions reported inactive by the
// activity callback are pinned to 0.5 across their whole block, so
// configurations that differ only in dont-care fields coincide in encoded
// space. Decoding ignores activity, rounds integers to the nearest grid
// point, clamps to bounds, and resolves categorical blocks by argmax
// (first index wins ties).
class ParamSpace {
 public:
  void add_real(std::string name, double lo, double hi);
  void add_integer(std::string name, int lo, int hi);
  void add_categorical(std::string name, std::vector<std::string> choices);

  // Callback deciding which raw dimensions matter for a given configuration.
  // Unset means everything is always active.
  void set_activity(std::function<std::vector<bool>(const std::vector<double>&)> fn);

  std::size_t raw_size() const { return dims_.size(); }
  int encoded_size() const;
  const std::vector<Dim>& dims() const { return dims_; }

  std::vector<bool> activity(const std::vector<double>& raw) const;

  // Throws RangeError when a value lies outside its bounds or a categorical
  // index is not integral.
  Eigen::VectorXd encode(const std::vector<double>& raw) const;
  std::vector<double> decode(const Eigen::VectorXd& x) const;

  // Uniform draw over the raw space (bounds for numerics, choices for
  // categoricals), ignoring activity.
  std::vector<double> sample(std::mt19937_64& rng) const;

 private:
  std::vector<Dim> dims_;
  std::function<std::vector<bool>(const std::vector<double>&)> activity_;
};

// The 19-dimensional architecture space the optimizer searches over,
// matching the hyperparameter fields and their bounds, with activity wired
// to field_active. Encodes to 23 coordinates.
ParamSpace make_search_space();

// Raw configuration <-> hyperparameter struct, in the dimension order of
// make_search_space(). hp_from_raw does not validate; feed its result to
// model::validate or model::resolve for that.
model::HyperParams hp_from_raw(const std::vector<double>& raw);
std::vector<double> raw_from_hp(const model::HyperParams& hp);

}  // namespace dcsep::hpo
