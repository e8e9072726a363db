#include "dcsep/bo.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <utility>

#include "dcsep/error.hpp"
#include "dcsep/lbfgs.hpp"
#include "dcsep/model.hpp"

namespace dcsep::hpo {

namespace {

constexpr int kMaxRejectionDraws = 10000;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> first_feasible(const ParamSpace& space, const Feasible& feasible,
                                   std::mt19937_64& rng) {
  for (int draw = 0; draw < kMaxRejectionDraws; ++draw) {
    std::vector<double> raw = space.sample(rng);
    if (!feasible || feasible(raw)) return raw;
  }
  throw FeasibilityError("no feasible configuration in " +
                         std::to_string(kMaxRejectionDraws) + " random draws");
}

}  // namespace

std::vector<TrialRecord> load_ledger(const std::filesystem::path& path) {
  std::vector<TrialRecord> records;
  if (!std::filesystem::exists(path)) return records;
  std::ifstream in(path);
  if (!in) throw IoError("cannot read ledger " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(trial_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("ledger " + path.string() + " line " + std::to_string(lineno) + ": " +
                    e.what());
    }
  }
  return records;
}

nlohmann::json to_json(const TrialRecord& r) {
  return nlohmann::json{
      {"index", r.index},
      {"raw", r.raw},
      {"encoded", std::vector<double>(r.encoded.data(), r.encoded.data() + r.encoded.size())},
      {"loss", r.loss},
      {"aborted", r.aborted},
      {"seed", r.seed},
      {"started_at", r.started_at},
      {"finished_at", r.finished_at},
      {"extra", r.extra}};
}

TrialRecord trial_from_json(const nlohmann::json& j) {
  TrialRecord r;
  r.index = j.at("index").get<int>();
  r.raw = j.at("raw").get<std::vector<double>>();
  const auto enc = j.at("encoded").get<std::vector<double>>();
  r.encoded = Eigen::Map<const Eigen::VectorXd>(enc.data(), static_cast<Eigen::Index>(enc.size()));
  r.loss = j.at("loss").get<double>();
  r.aborted = j.at("aborted").get<bool>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.started_at = j.value("started_at", std::string());
  r.finished_at = j.value("finished_at", std::string());
  r.extra = j.value("extra", nlohmann::json());
  return r;
}

std::uint64_t trial_seed(std::uint64_t run_seed, int index) {
  // splitmix64 applied to the index-th point of the run's seed sequence.
  std::uint64_t z = run_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<double> propose(const Gp& gp, const ParamSpace& space, double best_y,
                            const Eigen::VectorXd& best_x, const AcqConfig& cfg,
                            const Feasible& feasible, std::mt19937_64& rng) {
  const int d = space.encoded_size();
  if (gp.dims() != d) throw ShapeError("surrogate and search space dimensions differ");
  if (best_x.size() != d) throw ShapeError("incumbent point has the wrong dimension");

  const Eigen::VectorXd lo = Eigen::VectorXd::Zero(d);
  const Eigen::VectorXd hi = Eigen::VectorXd::Ones(d);
  const ObjectiveFn neg_acq = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const double a = acquisition_with_grad(gp, x, best_y, cfg, grad);
    grad = -grad;
    return -a;
  };
  LbfgsOptions lopt;
  lopt.max_iters = 60;
  lopt.tol = 1e-8;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  bool found = false;
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<double> best_raw;
  const auto consider = [&](std::vector<double> raw) {
    if (feasible && !feasible(raw)) return;
    // Score at the canonical encoding: rounding and activity masking can
    // move the point the optimizer actually found.
    const double score = acquisition(gp, space.encode(raw), best_y, cfg);
    if (!found || score > best_score) {
      found = true;
      best_score = score;
      best_raw = std::move(raw);
    }
  };

  const int starts = std::max(1, cfg.restarts);
  for (int s = 0; s <= starts; ++s) {
    Eigen::VectorXd x0(d);
    if (s == 0) {
      x0 = best_x;
    } else {
      for (int i = 0; i < d; ++i) x0[i] = unit(rng);
    }
    const LbfgsResult res = lbfgs_minimize(neg_acq, x0, lo, hi, lopt);
    consider(space.decode(res.x));
  }
  if (found) return best_raw;

  for (int draw = 0; draw < kMaxRejectionDraws; ++draw) consider(space.sample(rng));
  if (!found)
    throw FeasibilityError("no feasible configuration among optimizer candidates or " +
                           std::to_string(kMaxRejectionDraws) + " random draws");
  return best_raw;
}

std::vector<TrialRecord> bo_loop(const ParamSpace& space, const Objective& objective,
                                 const Feasible& feasible, const BoOptions& opt) {
  if (!objective) throw ConfigError("optimization loop needs an objective");
  if (opt.n_init < 2) throw ConfigError("n_init must be at least 2");
  if (opt.n_iter < 0) throw ConfigError("n_iter must be non-negative");

  std::vector<TrialRecord> records;
  std::ofstream out;
  if (!opt.ledger.empty()) {
    records = load_ledger(opt.ledger);
    for (std::size_t k = 0; k < records.size(); ++k) {
      if (records[k].index != static_cast<int>(k))
        throw IoError("ledger " + opt.ledger.string() + " has non-contiguous trial indices");
      if (records[k].raw.size() != space.raw_size() ||
          records[k].encoded.size() != space.encoded_size())
        throw IoError("ledger " + opt.ledger.string() + " does not match the search space");
    }
    if (opt.ledger.has_parent_path()) std::filesystem::create_directories(opt.ledger.parent_path());
    out.open(opt.ledger, std::ios::app);
    if (!out) throw IoError("cannot open ledger " + opt.ledger.string() + " for appending");
  }

  const int total = opt.n_init + opt.n_iter;
  for (int i = static_cast<int>(records.size()); i < total; ++i) {
    const std::uint64_t seed_i = trial_seed(opt.seed, i);
    std::mt19937_64 rng(seed_i);

    std::vector<double> raw;
    if (i < opt.n_init) {
      raw = first_feasible(space, feasible, rng);
    } else {
      Eigen::MatrixXd X(static_cast<Eigen::Index>(records.size()), space.encoded_size());
      Eigen::VectorXd y(static_cast<Eigen::Index>(records.size()));
      Eigen::Index best = 0;
      for (std::size_t r = 0; r < records.size(); ++r) {
        X.row(static_cast<Eigen::Index>(r)) = records[r].encoded;
        y[static_cast<Eigen::Index>(r)] = records[r].loss;
        if (records[r].loss < y[best]) best = static_cast<Eigen::Index>(r);
      }
      const Gp gp = Gp::fit(X, y, seed_i);
      raw = propose(gp, space, y[best], records[best].encoded, opt.acq, feasible, rng);
    }

    TrialRecord rec;
    rec.index = i;
    rec.raw = raw;
    rec.encoded = space.encode(raw);
    rec.seed = seed_i;
    rec.started_at = utc_now();
    try {
      Observation ob = objective(raw, seed_i);
      rec.extra = std::move(ob.extra);
      if (std::isfinite(ob.loss)) {
        rec.loss = ob.loss;
        rec.aborted = ob.aborted;
      } else {
        rec.loss = opt.failure_loss;
        rec.aborted = true;
      }
    } catch (const std::exception& e) {
      rec.loss = opt.failure_loss;
      rec.aborted = true;
      rec.extra = nlohmann::json{{"error", e.what()}};
    }
    rec.finished_at = utc_now();

    if (out.is_open()) {
      out << to_json(rec).dump() << '\n';
      out.flush();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

Feasible budget_feasible(long long min_params, long long max_params, Eigen::Index F,
                         Eigen::Index D, Eigen::Index S) {
  if (min_params > max_params) throw ConfigError("parameter budget window is empty");
  return [=](const std::vector<double>& raw) {
    try {
      const model::HyperParams hp = hp_from_raw(raw);
      model::validate(hp);
      const long long total = model::count_params(model::resolve(hp, F, D, S)).total;
      return total >= min_params && total <= max_params;
    } catch (const Error&) {
      return false;
    }
  };
}

}  // namespace dcsep::hpo
