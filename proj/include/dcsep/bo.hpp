#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "dcsep/acquisition.hpp"
#include "dcsep/gp.hpp"
#include "dcsep/space.hpp"

namespace dcsep::hpo {

// One evaluated configuration, exactly as persisted in the ledger.
struct TrialRecord {
  int index = 0;
  std::vector<double> raw;   // configuration in raw space
  Eigen::VectorXd encoded;   // canonical unit-cube encoding of `raw`
  double loss = 0.0;         // objective value; the failure loss when aborted
  bool aborted = false;
  std::uint64_t seed = 0;    // per-trial seed handed to the objective
  std::string started_at;    // UTC, second resolution
  std::string finished_at;
  nlohmann::json extra;      // objective-defined payload (architecture, scores...)
};

nlohmann::json to_json(const TrialRecord& r);
TrialRecord trial_from_json(const nlohmann::json& j);

// What the objective reports back for one configuration. `aborted` marks
// runs cut short by the early-loss gate; their loss is already clipped.
struct Observation {
  double loss = 0.0;
  bool aborted = false;
  nlohmann::json extra;
};

using Objective = std::function<Observation(const std::vector<double>& raw, std::uint64_t seed)>;
using Feasible = std::function<bool(const std::vector<double>& raw)>;

struct BoOptions {
  int n_init = 10;  // random feasible trials before the surrogate engages (>= 2)
  int n_iter = 40;  // surrogate-guided trials after that
  // Loss recorded when the objective throws or reports a non-finite value,
  // matching the trainer's abort clip so such trials stay in the surrogate.
  double failure_loss = 0.17;
  AcqConfig acq;
  std::uint64_t seed = 0;
  // JSONL ledger, one TrialRecord per line, appended after every trial.
  // Existing records are reloaded and the loop continues after them.
  // Empty path keeps everything in memory.
  std::filesystem::path ledger;
};

// Deterministic per-trial seed stream: trial i of a run always draws the
// same seed, which is what makes interrupted runs resumable.
std::uint64_t trial_seed(std::uint64_t run_seed, int index);

// Reads a JSONL ledger, oldest first. A missing file yields an empty
// vector; an unreadable or malformed one throws IoError.
std::vector<TrialRecord> load_ledger(const std::filesystem::path& path);

// Maximizes the acquisition over the unit cube from `cfg.restarts` random
// starts plus the incumbent `best_x`, decodes each candidate, drops
// infeasible ones, and returns the feasible candidate whose canonical
// encoding scores highest. Falls back to rejection sampling (10,000 draws)
// when every candidate is infeasible; throws FeasibilityError when that
// also finds nothing.
std::vector<double> propose(const Gp& gp, const ParamSpace& space, double best_y,
                            const Eigen::VectorXd& best_x, const AcqConfig& cfg,
                            const Feasible& feasible, std::mt19937_64& rng);

// Sequential optimization loop: n_init random feasible configurations, then
// fit-propose-evaluate until n_init + n_iter trials exist. Objective
// exceptions and non-finite losses become aborted trials at failure_loss.
// Returns the full ledger, oldest first.
std::vector<TrialRecord> bo_loop(const ParamSpace& space, const Objective& objective,
                                 const Feasible& feasible, const BoOptions& opt);

// Feasibility of raw points of make_search_space() under a trainable-
// parameter budget: the resolved architecture's total must land in
// [min_params, max_params]. Invalid configurations are infeasible.
Feasible budget_feasible(long long min_params, long long max_params, Eigen::Index F = 129,
                         Eigen::Index D = 20, Eigen::Index S = 2);

}  // namespace dcsep::hpo
