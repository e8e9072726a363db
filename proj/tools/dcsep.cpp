#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcsep/commands.hpp"
#include "dcsep/config.hpp"
#include "dcsep/error.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "experiment config (JSON)")->required();
  cmd->add_option("--set", c.overrides, "override a config key, section.key=value (repeatable)");
}

int fail(const char* kind, const std::exception& e, int code) {
  std::cerr << "error (" << kind << "): " << e.what() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-speaker separation workbench: synthesize data, train and run the\n"
               "embedding model, score estimates, and search over architectures"};
  app.require_subcommand(1);

  Common common;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic two-speaker dataset");
  std::string synth_out;
  add_common(synth, common);
  synth->add_option("--out", synth_out, "dataset directory to create")->required();

  CLI::App* train = app.add_subcommand("train", "train the configured architecture");
  add_common(train, common);

  CLI::App* separate = app.add_subcommand("separate", "estimate both sources of every mixture");
  std::string sep_checkpoint, sep_data, sep_out;
  bool sep_ibm = false;
  add_common(separate, common);
  separate->add_option("--checkpoint", sep_checkpoint, "checkpoint stem (default <out_dir>/model)");
  separate->add_option("--data", sep_data, "dataset directory (default: the config's data section)");
  separate->add_option("--out", sep_out, "estimates directory (default <out_dir>/estimates)");
  separate->add_flag("--ibm", sep_ibm, "oracle binary masks from the reference sources");

  CLI::App* evaluate = app.add_subcommand("evaluate", "score estimates against the references");
  std::string eval_data, eval_estimates, eval_out;
  add_common(evaluate, common);
  evaluate->add_option("--data", eval_data, "dataset directory (default: the config's data section)");
  evaluate->add_option("--estimates", eval_estimates, "estimates directory (default <out_dir>/estimates)");
  evaluate->add_option("--out", eval_out, "per-item CSV (default <out_dir>/scores.csv)");

  CLI::App* hpo = app.add_subcommand("hpo", "run the budgeted architecture search");
  add_common(hpo, common);

  CLI::App* report = app.add_subcommand("report", "grouped averages over a search ledger");
  std::string rep_ledger, rep_group_by, rep_out;
  int rep_top_k = 5;
  double rep_min_fraction = 0.2;
  report->add_option("--ledger", rep_ledger, "search ledger (JSONL)")->required();
  report->add_option("--group-by", rep_group_by, "upsampling, lstm_direction, or concat")
      ->required();
  report->add_option("--top-k", rep_top_k, "trials averaged per group (default 5)");
  report->add_option("--min-fraction", rep_min_fraction,
                     "minimum fraction of parameters in the field's branch (default 0.2)");
  report->add_option("--out", rep_out, "output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (report->parsed()) {
      dcsep::cli::ReportArgs args;
      args.ledger = rep_ledger;
      args.group_by = rep_group_by;
      args.top_k = rep_top_k;
      args.min_fraction = rep_min_fraction;
      args.out_csv = rep_out;
      return dcsep::cli::cmd_report(args);
    }

    const dcsep::cli::ExperimentConfig cfg =
        dcsep::cli::load_config(common.config, common.overrides);
    if (synth->parsed()) return dcsep::cli::cmd_synth(cfg, synth_out);
    if (train->parsed()) return dcsep::cli::cmd_train(cfg);
    if (separate->parsed()) {
      dcsep::cli::SeparateArgs args;
      args.checkpoint = sep_checkpoint;
      args.data = sep_data;
      args.out = sep_out;
      args.ibm = sep_ibm;
      return dcsep::cli::cmd_separate(cfg, args);
    }
    if (evaluate->parsed()) {
      dcsep::cli::EvaluateArgs args;
      args.data = eval_data;
      args.estimates = eval_estimates;
      args.out_csv = eval_out;
      return dcsep::cli::cmd_evaluate(cfg, args);
    }
    if (hpo->parsed()) return dcsep::cli::cmd_hpo(cfg);
    return 2;  // unreachable: require_subcommand(1)
  } catch (const dcsep::ConfigError& e) {
    return fail("config", e, 2);
  } catch (const dcsep::RangeError& e) {
    return fail("config", e, 2);
  } catch (const dcsep::ShapeError& e) {
    return fail("config", e, 2);
  } catch (const dcsep::EmptyCorpus& e) {
    return fail("config", e, 2);
  } catch (const dcsep::InputTooShort& e) {
    return fail("config", e, 2);
  } catch (const dcsep::IoError& e) {
    return fail("missing artifact", e, 3);
  } catch (const dcsep::Error& e) {
    return fail("numerical", e, 4);
  } catch (const std::exception& e) {
    return fail("internal", e, 4);
  }
}
