#include "dcsep/space.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "dcsep/error.hpp"

namespace dcsep::hpo {

void ParamSpace::add_real(std::string name, double lo, double hi) {
  if (!(lo < hi)) throw ConfigError("real dimension '" + name + "' needs lo < hi");
  dims_.push_back({DimKind::Real, std::move(name), lo, hi, {}});
}

void ParamSpace::add_integer(std::string name, int lo, int hi) {
  if (lo >= hi) throw ConfigError("integer dimension '" + name + "' needs lo < hi");
  dims_.push_back({DimKind::Integer, std::move(name), static_cast<double>(lo),
                   static_cast<double>(hi), {}});
}

void ParamSpace::add_categorical(std::string name, std::vector<std::string> choices) {
  if (choices.empty()) throw ConfigError("categorical dimension '" + name + "' needs choices");
  dims_.push_back({DimKind::Categorical, std::move(name), 0.0, 0.0, std::move(choices)});
}

void ParamSpace::set_activity(std::function<std::vector<bool>(const std::vector<double>&)> fn) {
  activity_ = std::move(fn);
}

int ParamSpace::encoded_size() const {
  int n = 0;
  for (const Dim& d : dims_) n += d.width();
  return n;
}

std::vector<bool> ParamSpace::activity(const std::vector<double>& raw) const {
  if (raw.size() != dims_.size())
    throw ShapeError("configuration has " + std::to_string(raw.size()) + " values, space has " +
                     std::to_string(dims_.size()) + " dimensions");
  if (!activity_) return std::vector<bool>(dims_.size(), true);
  std::vector<bool> act = activity_(raw);
  if (act.size() != dims_.size())
    throw ShapeError("activity callback returned " + std::to_string(act.size()) +
                     " flags for " + std::to_string(dims_.size()) + " dimensions");
  return act;
}

Eigen::VectorXd ParamSpace::encode(const std::vector<double>& raw) const {
  const std::vector<bool> act = activity(raw);
  Eigen::VectorXd x(encoded_size());
  int off = 0;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const Dim& d = dims_[i];
    const double v = raw[i];
    if (d.kind == DimKind::Categorical) {
      const auto idx = std::llround(v);
      if (std::abs(v - static_cast<double>(idx)) > 1e-9 || idx < 0 ||
          idx >= static_cast<long long>(d.choices.size()))
        throw RangeError("'" + d.name + "' index " + std::to_string(v) + " is not one of 0.." +
                         std::to_string(d.choices.size() - 1));
      for (int c = 0; c < d.width(); ++c)
        x[off + c] = act[i] ? (c == idx ? 1.0 : 0.0) : 0.5;
    } else {
      if (!(v >= d.lo && v <= d.hi))
        throw RangeError("'" + d.name + "' = " + std::to_string(v) + " outside [" +
                         std::to_string(d.lo) + ", " + std::to_string(d.hi) + "]");
      x[off] = act[i] ? (v - d.lo) / (d.hi - d.lo) : 0.5;
    }
    off += d.width();
  }
  return x;
}

std::vector<double> ParamSpace::decode(const Eigen::VectorXd& x) const {
  if (x.size() != encoded_size())
    throw ShapeError("encoded point has " + std::to_string(x.size()) + " coordinates, expected " +
                     std::to_string(encoded_size()));
  std::vector<double> raw(dims_.size());
  int off = 0;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const Dim& d = dims_[i];
    switch (d.kind) {
      case DimKind::Real:
        raw[i] = std::clamp(d.lo + x[off] * (d.hi - d.lo), d.lo, d.hi);
        break;
      case DimKind::Integer:
        raw[i] = std::clamp(d.lo + static_cast<double>(std::llround(x[off] * (d.hi - d.lo))),
                            d.lo, d.hi);
        break;
      case DimKind::Categorical: {
        int best = 0;
        for (int c = 1; c < d.width(); ++c)
          if (x[off + c] > x[off + best]) best = c;
        raw[i] = static_cast<double>(best);
        break;
      }
    }
    off += d.width();
  }
  return raw;
}

std::vector<double> ParamSpace::sample(std::mt19937_64& rng) const {
  std::vector<double> raw(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const Dim& d = dims_[i];
    switch (d.kind) {
      case DimKind::Real:
        raw[i] = std::uniform_real_distribution<double>(d.lo, d.hi)(rng);
        break;
      case DimKind::Integer:
        raw[i] = static_cast<double>(std::uniform_int_distribution<long long>(
            static_cast<long long>(d.lo), static_cast<long long>(d.hi))(rng));
        break;
      case DimKind::Categorical:
        raw[i] = static_cast<double>(
            std::uniform_int_distribution<int>(0, d.width() - 1)(rng));
        break;
    }
  }
  return raw;
}

namespace {

constexpr std::array<const char*, 19> kFieldNames = {
    "num_enc_layers", "first_enc_channels", "channel_factor", "last_dec_channels",
    "kernel_t",       "kernel_t_decay",     "kernel_f",       "kernel_f_decay",
    "pool_period_t",  "pool_period_f",      "upsampling",     "lstm_layers",
    "lstm_first_cells", "lstm_cell_factor", "lstm_direction", "concat",
    "fc_layers",      "fc_first_units",     "fc_unit_factor"};

constexpr std::array<model::Upsampling, 3> kUpsampling = {
    model::Upsampling::Bypass, model::Upsampling::Unpooling, model::Upsampling::None};
constexpr std::array<model::LstmDirection, 2> kDirection = {model::LstmDirection::Uni,
                                                            model::LstmDirection::Bi};
constexpr std::array<model::Concat, 2> kConcat = {model::Concat::Broadcast,
                                                  model::Concat::Flattening};

int round_index(double v, std::size_t n, const char* what) {
  const auto idx = std::llround(v);
  if (idx < 0 || idx >= static_cast<long long>(n))
    throw RangeError(std::string(what) + " index " + std::to_string(v) + " out of range");
  return static_cast<int>(idx);
}

template <class E, std::size_t N>
double index_of(const std::array<E, N>& table, E value) {
  for (std::size_t i = 0; i < N; ++i)
    if (table[i] == value) return static_cast<double>(i);
  throw InvalidConfig("unmapped enum value");
}

}  // namespace

ParamSpace make_search_space() {
  ParamSpace s;
  s.add_integer("num_enc_layers", 0, 6);
  s.add_integer("first_enc_channels", 1, 2000);
  s.add_real("channel_factor", 0.5, 3.0);
  s.add_integer("last_dec_channels", 1, 200);
  s.add_integer("kernel_t", 1, 15);
  s.add_real("kernel_t_decay", 0.83, 3.33);
  s.add_integer("kernel_f", 1, 15);
  s.add_real("kernel_f_decay", 0.83, 3.33);
  s.add_integer("pool_period_t", 1, 7);
  s.add_integer("pool_period_f", 1, 7);
  s.add_categorical("upsampling", {"bypass", "unpooling", "none"});
  s.add_integer("lstm_layers", 0, 6);
  s.add_integer("lstm_first_cells", 1, 2000);
  s.add_real("lstm_cell_factor", 0.5, 3.0);
  s.add_categorical("lstm_direction", {"uni", "bi"});
  s.add_categorical("concat", {"broadcast", "flattening"});
  s.add_integer("fc_layers", 0, 3);
  s.add_integer("fc_first_units", 1, 1024);
  s.add_real("fc_unit_factor", 0.3, 2.0);
  s.set_activity([](const std::vector<double>& raw) {
    const model::HyperParams hp = hp_from_raw(raw);
    std::vector<bool> act(kFieldNames.size());
    for (std::size_t i = 0; i < kFieldNames.size(); ++i)
      act[i] = model::field_active(hp, kFieldNames[i]);
    return act;
  });
  return s;
}

model::HyperParams hp_from_raw(const std::vector<double>& raw) {
  if (raw.size() != kFieldNames.size())
    throw ShapeError("expected " + std::to_string(kFieldNames.size()) +
                     " raw values, got " + std::to_string(raw.size()));
  model::HyperParams hp;
  hp.num_enc_layers = static_cast<int>(std::llround(raw[0]));
  hp.first_enc_channels = static_cast<int>(std::llround(raw[1]));
  hp.channel_factor = raw[2];
  hp.last_dec_channels = static_cast<int>(std::llround(raw[3]));
  hp.kernel_t = static_cast<int>(std::llround(raw[4]));
  hp.kernel_t_decay = raw[5];
  hp.kernel_f = static_cast<int>(std::llround(raw[6]));
  hp.kernel_f_decay = raw[7];
  hp.pool_period_t = static_cast<int>(std::llround(raw[8]));
  hp.pool_period_f = static_cast<int>(std::llround(raw[9]));
  hp.upsampling = kUpsampling[round_index(raw[10], kUpsampling.size(), "upsampling")];
  hp.lstm_layers = static_cast<int>(std::llround(raw[11]));
  hp.lstm_first_cells = static_cast<int>(std::llround(raw[12]));
  hp.lstm_cell_factor = raw[13];
  hp.lstm_direction = kDirection[round_index(raw[14], kDirection.size(), "lstm_direction")];
  hp.concat = kConcat[round_index(raw[15], kConcat.size(), "concat")];
  hp.fc_layers = static_cast<int>(std::llround(raw[16]));
  hp.fc_first_units = static_cast<int>(std::llround(raw[17]));
  hp.fc_unit_factor = raw[18];
  return hp;
}

std::vector<double> raw_from_hp(const model::HyperParams& hp) {
  return {static_cast<double>(hp.num_enc_layers),
          static_cast<double>(hp.first_enc_channels),
          hp.channel_factor,
          static_cast<double>(hp.last_dec_channels),
          static_cast<double>(hp.kernel_t),
          hp.kernel_t_decay,
          static_cast<double>(hp.kernel_f),
          hp.kernel_f_decay,
          static_cast<double>(hp.pool_period_t),
          static_cast<double>(hp.pool_period_f),
          index_of(kUpsampling, hp.upsampling),
          static_cast<double>(hp.lstm_layers),
          static_cast<double>(hp.lstm_first_cells),
          hp.lstm_cell_factor,
          index_of(kDirection, hp.lstm_direction),
          index_of(kConcat, hp.concat),
          static_cast<double>(hp.fc_layers),
          static_cast<double>(hp.fc_first_units),
          hp.fc_unit_factor};
}

}  // namespace dcsep::hpo
