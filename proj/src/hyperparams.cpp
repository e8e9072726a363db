#include "dcsep/hyperparams.hpp"

#include "dcsep/error.hpp"

namespace dcsep::model {

using nlohmann::json;

std::string to_string(Upsampling u) {
  switch (u) {
    case Upsampling::Bypass: return "bypass";
    case Upsampling::Unpooling: return "unpooling";
    case Upsampling::None: return "none";
  }
  throw InvalidConfig("bad upsampling value");
}

std::string to_string(LstmDirection d) {
  return d == LstmDirection::Uni ? "uni" : "bi";
}

std::string to_string(Concat c) {
  return c == Concat::Broadcast ? "broadcast" : "flattening";
}

Upsampling upsampling_from_string(const std::string& s) {
  if (s == "bypass") return Upsampling::Bypass;
  if (s == "unpooling") return Upsampling::Unpooling;
  if (s == "none") return Upsampling::None;
  throw InvalidConfig("upsampling must be bypass|unpooling|none, got '" + s + "'");
}

LstmDirection direction_from_string(const std::string& s) {
  if (s == "uni") return LstmDirection::Uni;
  if (s == "bi") return LstmDirection::Bi;
  throw InvalidConfig("lstm_direction must be uni|bi, got '" + s + "'");
}

Concat concat_from_string(const std::string& s) {
  if (s == "broadcast") return Concat::Broadcast;
  if (s == "flattening") return Concat::Flattening;
  throw InvalidConfig("concat must be broadcast|flattening, got '" + s + "'");
}

bool field_active(const HyperParams& hp, const std::string& field) {
  const int L = hp.num_enc_layers;
  if (field == "num_enc_layers" || field == "lstm_layers" || field == "fc_layers") return true;
  if (field == "first_enc_channels" || field == "last_dec_channels" || field == "kernel_t" ||
      field == "kernel_f" || field == "pool_period_t" || field == "pool_period_f" ||
      field == "concat")
    return L >= 1;
  if (field == "channel_factor") return L >= 2;
  // Decay only matters once that axis actually gets pooled; the first
  // pooling event on an axis happens after layer pool_period.
  if (field == "kernel_t_decay") return L >= hp.pool_period_t;
  if (field == "kernel_f_decay") return L >= hp.pool_period_f;
  if (field == "upsampling") return L >= hp.pool_period_t || L >= hp.pool_period_f;
  if (field == "lstm_first_cells" || field == "lstm_direction") return hp.lstm_layers >= 1;
  if (field == "lstm_cell_factor") return hp.lstm_layers >= 2;
  if (field == "fc_first_units") return hp.fc_layers >= 1;
  if (field == "fc_unit_factor") return hp.fc_layers >= 2;
  throw InvalidConfig("unknown hyperparameter field '" + field + "'");
}

namespace {

void check_int(const char* name, int v, int lo, int hi) {
  if (v < lo || v > hi)
    throw InvalidConfig(std::string(name) + " = " + std::to_string(v) + " outside [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

void check_real(const char* name, double v, double lo, double hi) {
  if (!(v >= lo && v <= hi))
    throw InvalidConfig(std::string(name) + " = " + std::to_string(v) + " outside [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

}  // namespace

void validate(const HyperParams& hp) {
  check_int("num_enc_layers", hp.num_enc_layers, 0, 6);
  check_int("lstm_layers", hp.lstm_layers, 0, 6);
  check_int("fc_layers", hp.fc_layers, 0, 3);
  if (hp.num_enc_layers == 0 && hp.lstm_layers == 0)
    throw InvalidConfig("need at least one of the CNN and LSTM branches");

  if (field_active(hp, "first_enc_channels")) {
    check_int("first_enc_channels", hp.first_enc_channels, 1, 2000);
    check_int("last_dec_channels", hp.last_dec_channels, 1, 200);
    check_int("kernel_t", hp.kernel_t, 1, 15);
    check_int("kernel_f", hp.kernel_f, 1, 15);
    check_int("pool_period_t", hp.pool_period_t, 1, 7);
    check_int("pool_period_f", hp.pool_period_f, 1, 7);
  }
  if (field_active(hp, "channel_factor")) check_real("channel_factor", hp.channel_factor, 0.5, 3.0);
  if (field_active(hp, "kernel_t_decay")) check_real("kernel_t_decay", hp.kernel_t_decay, 0.83, 3.33);
  if (field_active(hp, "kernel_f_decay")) check_real("kernel_f_decay", hp.kernel_f_decay, 0.83, 3.33);
  if (field_active(hp, "lstm_first_cells")) check_int("lstm_first_cells", hp.lstm_first_cells, 1, 2000);
  if (field_active(hp, "lstm_cell_factor")) check_real("lstm_cell_factor", hp.lstm_cell_factor, 0.5, 3.0);
  if (field_active(hp, "fc_first_units")) check_int("fc_first_units", hp.fc_first_units, 1, 1024);
  if (field_active(hp, "fc_unit_factor")) check_real("fc_unit_factor", hp.fc_unit_factor, 0.3, 2.0);
}

json to_json(const HyperParams& hp) {
  json j;
  auto put = [&](const char* name, json v) {
    j[name] = field_active(hp, name) ? std::move(v) : json(nullptr);
  };
  put("num_enc_layers", hp.num_enc_layers);
  put("first_enc_channels", hp.first_enc_channels);
  put("channel_factor", hp.channel_factor);
  put("last_dec_channels", hp.last_dec_channels);
  put("kernel_t", hp.kernel_t);
  put("kernel_t_decay", hp.kernel_t_decay);
  put("kernel_f", hp.kernel_f);
  put("kernel_f_decay", hp.kernel_f_decay);
  put("pool_period_t", hp.pool_period_t);
  put("pool_period_f", hp.pool_period_f);
  put("upsampling", to_string(hp.upsampling));
  put("lstm_layers", hp.lstm_layers);
  put("lstm_first_cells", hp.lstm_first_cells);
  put("lstm_cell_factor", hp.lstm_cell_factor);
  put("lstm_direction", to_string(hp.lstm_direction));
  put("concat", to_string(hp.concat));
  put("fc_layers", hp.fc_layers);
  put("fc_first_units", hp.fc_first_units);
  put("fc_unit_factor", hp.fc_unit_factor);
  return j;
}

HyperParams hyperparams_from_json(const json& j) {
  HyperParams hp;
  // Layer counts first: they decide which other fields must be present.
  auto get = [&](const char* name, auto& dst, auto parse) {
    const bool have = j.contains(name) && !j.at(name).is_null();
    if (!field_active(hp, name)) {
      return;  // null or absent or ignored stale value
    }
    if (!have) throw InvalidConfig(std::string("missing hyperparameter '") + name + "'");
    dst = parse(j.at(name));
  };
  auto as_int = [](const json& v) { return v.get<int>(); };
  auto as_real = [](const json& v) { return v.get<double>(); };

  if (!j.contains("num_enc_layers") || !j.contains("lstm_layers") || !j.contains("fc_layers"))
    throw InvalidConfig("hyperparameters need num_enc_layers, lstm_layers and fc_layers");
  hp.num_enc_layers = j.at("num_enc_layers").get<int>();
  hp.lstm_layers = j.at("lstm_layers").get<int>();
  hp.fc_layers = j.at("fc_layers").get<int>();

  get("first_enc_channels", hp.first_enc_channels, as_int);
  get("channel_factor", hp.channel_factor, as_real);
  get("last_dec_channels", hp.last_dec_channels, as_int);
  get("kernel_t", hp.kernel_t, as_int);
  get("kernel_f", hp.kernel_f, as_int);
  get("pool_period_t", hp.pool_period_t, as_int);
  get("pool_period_f", hp.pool_period_f, as_int);
  // Decay/upsampling activity depends on the pool periods parsed above.
  get("kernel_t_decay", hp.kernel_t_decay, as_real);
  get("kernel_f_decay", hp.kernel_f_decay, as_real);
  if (field_active(hp, "upsampling")) {
    if (!j.contains("upsampling") || j.at("upsampling").is_null())
      throw InvalidConfig("missing hyperparameter 'upsampling'");
    hp.upsampling = upsampling_from_string(j.at("upsampling").get<std::string>());
  }
  get("lstm_first_cells", hp.lstm_first_cells, as_int);
  get("lstm_cell_factor", hp.lstm_cell_factor, as_real);
  if (field_active(hp, "lstm_direction")) {
    if (!j.contains("lstm_direction") || j.at("lstm_direction").is_null())
      throw InvalidConfig("missing hyperparameter 'lstm_direction'");
    hp.lstm_direction = direction_from_string(j.at("lstm_direction").get<std::string>());
  }
  if (field_active(hp, "concat")) {
    if (!j.contains("concat") || j.at("concat").is_null())
      throw InvalidConfig("missing hyperparameter 'concat'");
    hp.concat = concat_from_string(j.at("concat").get<std::string>());
  }
  get("fc_first_units", hp.fc_first_units, as_int);
  get("fc_unit_factor", hp.fc_unit_factor, as_real);

  validate(hp);
  return hp;
}

}  // namespace dcsep::model
