#include "dcsep/model.hpp"

#include <cmath>
#include <string>

#include "dcsep/error.hpp"

namespace dcsep::model {

namespace {

// Geometric progressions round half away from zero and never drop below 1.
Eigen::Index geom(double first, double factor, int step) {
  const double v = first * std::pow(factor, step);
  return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::round(v)));
}

Eigen::Index decayed(Eigen::Index extent, double decay) {
  return std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::round(static_cast<double>(extent) / decay)));
}

}  // namespace

Eigen::Index ModelSpec::lstm_out_width() const {
  if (lstm_widths.empty()) return 0;
  return lstm_widths.back() * (lstm_direction == LstmDirection::Bi ? 2 : 1);
}

Eigen::Index ModelSpec::head_in_dim() const {
  const Eigen::Index c = has_cnn() ? decoder.back().out_ch : 0;
  if (has_cnn() && concat == Concat::Broadcast) return c + lstm_out_width();
  return F * c + lstm_out_width();
}

Eigen::Index ModelSpec::head_out_dim() const {
  return (has_cnn() && concat == Concat::Broadcast) ? D : F * D;
}

ModelSpec resolve(const HyperParams& hp, Eigen::Index F, Eigen::Index D, Eigen::Index S) {
  validate(hp);
  if (F < 1 || D < 1 || S != 2) throw InvalidConfig("resolve: need F >= 1, D >= 1, S = 2");

  ModelSpec spec;
  spec.F = F;
  spec.D = D;
  spec.S = S;
  // Without a pooling event the upsampling choice must not matter, so the
  // resolved spec pins it to None (no undo steps, no skip concatenations).
  spec.upsampling = field_active(hp, "upsampling") ? hp.upsampling : Upsampling::None;
  spec.lstm_direction = hp.lstm_direction;

  const int L = hp.num_enc_layers;
  if (L >= 1) {
    std::vector<Eigen::Index> channels(static_cast<size_t>(L));
    for (int l = 0; l < L; ++l)
      channels[static_cast<size_t>(l)] =
          geom(static_cast<double>(hp.first_enc_channels), hp.channel_factor, l);

    Eigen::Index kt = hp.kernel_t, kf = hp.kernel_f;
    for (int l = 0; l < L; ++l) {
      ConvSpec c;
      c.in_ch = l == 0 ? 1 : channels[static_cast<size_t>(l - 1)];
      c.out_ch = channels[static_cast<size_t>(l)];
      c.kt = kt;
      c.kf = kf;
      if ((l + 1) % hp.pool_period_t == 0) {
        c.pool_t = 2;
        kt = decayed(kt, hp.kernel_t_decay);
      }
      if ((l + 1) % hp.pool_period_f == 0) {
        c.pool_f = 2;
        kf = decayed(kf, hp.kernel_f_decay);
      }
      spec.encoder.push_back(c);
    }

    const bool bypass = spec.upsampling == Upsampling::Bypass;
    for (int j = 0; j < L; ++j) {
      const int m = L - 1 - j;  // encoder layer this decoder step mirrors
      const ConvSpec& mirror = spec.encoder[static_cast<size_t>(m)];
      ConvSpec d;
      d.pool_t = mirror.pool_t;
      d.pool_f = mirror.pool_f;
      d.kt = mirror.kt;
      d.kf = mirror.kf;
      d.in_ch = channels[static_cast<size_t>(m)] + (bypass ? channels[static_cast<size_t>(m)] : 0);
      d.out_ch = j == L - 1 ? hp.last_dec_channels : channels[static_cast<size_t>(L - 2 - j)];
      spec.decoder.push_back(d);
    }
    spec.concat = hp.concat;
  } else {
    spec.concat = Concat::Flattening;  // frame-wise head is all that is left
  }

  for (int l = 0; l < hp.lstm_layers; ++l)
    spec.lstm_widths.push_back(
        geom(static_cast<double>(hp.lstm_first_cells), hp.lstm_cell_factor, l));
  for (int l = 0; l < hp.fc_layers; ++l)
    spec.fc_widths.push_back(geom(static_cast<double>(hp.fc_first_units), hp.fc_unit_factor, l));
  return spec;
}

ParamPartition count_params(const ModelSpec& spec) {
  ParamPartition p;
  for (const ConvSpec& c : spec.encoder)
    p.cnn += (c.kt * c.kf * c.in_ch + 1) * c.out_ch;
  for (const ConvSpec& c : spec.decoder)
    p.cnn += (c.kt * c.kf * c.in_ch + 1) * c.out_ch;

  const long long dirs = spec.lstm_direction == LstmDirection::Bi ? 2 : 1;
  long long in = spec.F;
  for (Eigen::Index n : spec.lstm_widths) {
    p.lstm += dirs * 4 * ((in + n) * n + n);
    in = dirs * n;
  }

  long long fc_in = spec.head_in_dim();
  for (Eigen::Index w : spec.fc_widths) {
    p.fc += (fc_in + 1) * w;
    fc_in = w;
  }
  p.fc += (fc_in + 1) * spec.head_out_dim();

  p.total = p.cnn + p.lstm + p.fc;
  return p;
}

BuiltModel build(const ModelSpec& spec, std::uint64_t seed) {
  if (!spec.has_cnn() && !spec.has_lstm())
    throw InvalidConfig("build: model has neither branch");

  BuiltModel m;
  nn::Graph& g = m.graph;
  std::mt19937_64 rng(seed);
  m.input = g.placeholder("features");

  nn::NodeId cnn_out = nn::kNoNode;
  if (spec.has_cnn()) {
    nn::NodeId cur = g.expand_dims_last(m.input);
    const size_t L = spec.encoder.size();
    std::vector<nn::NodeId> pre_pool(L, nn::kNoNode);  // post-relu activations
    std::vector<nn::NodeId> pools(L, nn::kNoNode);
    for (size_t l = 0; l < L; ++l) {
      const ConvSpec& c = spec.encoder[l];
      nn::NodeId conv = nn::conv_layer(g, cur, c.kt, c.kf, c.in_ch, c.out_ch,
                                       "enc" + std::to_string(l), rng);
      nn::NodeId act = g.relu(conv);
      pre_pool[l] = act;
      cur = act;
      if (c.pool_t > 1 || c.pool_f > 1) {
        pools[l] = g.maxpool(act, c.pool_t, c.pool_f);
        cur = pools[l];
      }
    }
    for (size_t j = 0; j < L; ++j) {
      const size_t mirror = L - 1 - j;
      const ConvSpec& d = spec.decoder[j];
      if (pools[mirror] != nn::kNoNode) {
        cur = spec.upsampling == Upsampling::Unpooling ? g.unpool(cur, pools[mirror])
                                                       : g.upsample_nn(cur, pools[mirror]);
      }
      if (spec.upsampling == Upsampling::Bypass) cur = g.concat_last(cur, pre_pool[mirror]);
      nn::NodeId conv =
          nn::conv_layer(g, cur, d.kt, d.kf, d.in_ch, d.out_ch, "dec" + std::to_string(j), rng);
      cur = g.relu(conv);
    }
    cnn_out = cur;
  }

  nn::NodeId lstm_out = nn::kNoNode;
  if (spec.has_lstm()) {
    nn::NodeId cur = m.input;  // frames as F-dimensional vectors
    Eigen::Index in_dim = spec.F;
    const nn::Direction dir =
        spec.lstm_direction == LstmDirection::Bi ? nn::Direction::Bi : nn::Direction::Uni;
    for (size_t l = 0; l < spec.lstm_widths.size(); ++l) {
      cur = nn::lstm_layer(g, cur, in_dim, spec.lstm_widths[l], dir,
                           "lstm" + std::to_string(l), rng);
      in_dim = spec.lstm_widths[l] * (dir == nn::Direction::Bi ? 2 : 1);
    }
    lstm_out = cur;
  }

  nn::NodeId head_in;
  if (spec.has_cnn() && spec.has_lstm()) {
    head_in = spec.concat == Concat::Broadcast ? g.concat_broadcast(cnn_out, lstm_out)
                                               : g.concat_flatten(cnn_out, lstm_out);
  } else if (spec.has_cnn()) {
    head_in = spec.concat == Concat::Broadcast ? cnn_out : g.flatten_frames(cnn_out);
  } else {
    head_in = lstm_out;
  }

  nn::NodeId cur = head_in;
  Eigen::Index in_dim = spec.head_in_dim();
  for (size_t l = 0; l < spec.fc_widths.size(); ++l) {
    cur = g.relu(nn::dense_layer(g, cur, in_dim, spec.fc_widths[l], "fc" + std::to_string(l), rng));
    in_dim = spec.fc_widths[l];
  }
  nn::NodeId emb = nn::dense_layer(g, cur, in_dim, spec.head_out_dim(), "head", rng);
  const bool per_bin_head = spec.has_cnn() && spec.concat == Concat::Broadcast;
  if (!per_bin_head) emb = g.split_last(emb, spec.F, spec.D);
  m.output = g.unit_normalize(emb);
  return m;
}

}  // namespace dcsep::model
