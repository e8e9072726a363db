#pragma once

#include <string>

#include <json.hpp>

namespace dcsep::model {

enum class Upsampling { Bypass, Unpooling, None };
enum class LstmDirection { Uni, Bi };
enum class Concat { Broadcast, Flattening };

std::string to_string(Upsampling u);
std::string to_string(LstmDirection d);
std::string to_string(Concat c);
Upsampling upsampling_from_string(const std::string& s);
LstmDirection direction_from_string(const std::string& s);
Concat concat_from_string(const std::string& s);

// One point in the architecture search space. Several fields only matter
// for certain layer counts (see field_active); inactive fields keep their
// defaults and serialize as null. Defaults reproduce the strongest joint
// CNN+LSTM configuration found by the search.
struct HyperParams {
  int num_enc_layers = 1;          // 0..6 encoder conv layers (decoder mirrors)
  int first_enc_channels = 489;    // 1..2000
  double channel_factor = 1.0;     // 0.5..3.0, needs >= 2 encoder layers
  int last_dec_channels = 144;     // 1..200
  int kernel_t = 2;                // 1..15 taps along time
  double kernel_t_decay = 1.0;     // 0.83..3.33, needs a time pooling event
  int kernel_f = 12;               // 1..15 taps along frequency
  double kernel_f_decay = 1.0;     // 0.83..3.33, needs a frequency pooling event
  int pool_period_t = 6;           // 1..7, pool time axis after every k-th layer
  int pool_period_f = 2;           // 1..7, likewise frequency
  Upsampling upsampling = Upsampling::Bypass;  // needs a pooling event
  int lstm_layers = 6;             // 0..6
  int lstm_first_cells = 533;      // 1..2000
  double lstm_cell_factor = 0.73;  // 0.5..3.0, needs >= 2 lstm layers
  LstmDirection lstm_direction = LstmDirection::Bi;
  Concat concat = Concat::Broadcast;  // head style, needs the CNN branch
  int fc_layers = 2;               // 0..3 hidden layers before the output map
  int fc_first_units = 731;        // 1..1024
  double fc_unit_factor = 0.44;    // 0.3..2.0, needs >= 2 fc layers
};

// Whether a field influences the resolved model, by JSON field name.
// Unknown names throw InvalidConfig.
bool field_active(const HyperParams& hp, const std::string& field);

// Range and consistency checks over the active fields; throws InvalidConfig.
void validate(const HyperParams& hp);

// Flat JSON object keyed by field name; inactive fields are null.
nlohmann::json to_json(const HyperParams& hp);

// Inverse of to_json. Active fields must be present and non-null; inactive
// ones may be null or absent. Validates on the way in.
HyperParams hyperparams_from_json(const nlohmann::json& j);

}  // namespace dcsep::model
