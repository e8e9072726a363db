#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "dcsep/bo.hpp"
#include "dcsep/config.hpp"

namespace dcsep::cli {

// Generates the synthetic corpus described by the config's data.synth
// section and writes it as a dataset directory (WAVs + manifest).
int cmd_synth(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// Trains the configured architecture and writes <out_dir>/model.{bin,json}
// plus <out_dir>/train_report.json.
int cmd_train(const ExperimentConfig& cfg);

struct SeparateArgs {
  std::filesystem::path checkpoint;  // empty -> <out_dir>/model
  std::filesystem::path data;        // empty -> the config's data section
  std::filesystem::path out;         // empty -> <out_dir>/estimates
  bool ibm = false;                  // oracle binary masks from the true sources
};

// Runs the checkpointed model (or the ideal-binary-mask oracle) over every
// mixture in the dataset and writes per-item estimate WAVs plus an index.
int cmd_separate(const ExperimentConfig& cfg, const SeparateArgs& args);

struct EvaluateArgs {
  std::filesystem::path data;       // empty -> the config's data section
  std::filesystem::path estimates;  // empty -> <out_dir>/estimates
  std::filesystem::path out_csv;    // empty -> <out_dir>/scores.csv
};

// Scores estimates against the dataset's references, writes a per-item CSV
// and prints the mean SDR improvement.
int cmd_evaluate(const ExperimentConfig& cfg, const EvaluateArgs& args);

// Runs the architecture search: each trial trains a candidate on the
// configured corpus. Appends to <out_dir>/ledger.jsonl (resumable) and
// rewrites <out_dir>/summary.csv, sorted by loss.
int cmd_hpo(const ExperimentConfig& cfg);

struct ReportArgs {
  std::filesystem::path ledger;
  std::string group_by;  // "upsampling", "lstm_direction", or "concat"
  int top_k = 5;
  // Minimum fraction of a trial's parameters in the branch the grouped
  // field belongs to (CNN for upsampling/concat, LSTM for lstm_direction).
  double min_fraction = 0.2;
  std::filesystem::path out_csv;  // empty -> stdout
};

struct GroupRow {
  std::string value;   // the categorical choice this row aggregates
  int qualifying = 0;  // trials with this value that pass the branch filter
  int averaged = 0;    // how many of those entered the averages (<= top_k)
  double mean_loss = std::numeric_limits<double>::quiet_NaN();
  double mean_sdr = std::numeric_limits<double>::quiet_NaN();
};

// For each choice of the grouped field: keep trials whose relevant branch
// holds at least min_fraction of the parameters, take the top_k by loss,
// and average loss and SDR improvement. A choice with no qualifying trials
// yields an empty row (counts zero, means NaN), never an error. Trials that
// never recorded the field, or where it was inactive, are skipped.
std::vector<GroupRow> report_rows(const std::vector<hpo::TrialRecord>& records,
                                  const std::string& group_by, int top_k, double min_fraction);

int cmd_report(const ReportArgs& args);

// One line per trial, sorted by loss (ties by trial index): index, loss
// clipped at clip_loss, abort flag, SDR improvement, parameter partition,
// and the categorical choices. Unrecorded values stay empty.
std::string summary_csv(std::vector<hpo::TrialRecord> records, double clip_loss);

}  // namespace dcsep::cli
