// Command-line front end: parses flags into a RunConfig, hands off to
// run_command and writes the report plus side files into --out-dir.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "predsens/errors.hpp"
#include "predsens/report.hpp"

namespace fs = std::filesystem;
using namespace predsens;

namespace {

void write_artifacts(const RunArtifacts& art, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  {
    std::ofstream out(dir / "report.json", std::ios::binary);
    if (!out) throw ValidationError("cannot write report.json under '" + out_dir + "'");
    out << art.envelope.to_json().dump(2) << '\n';
  }
  for (const auto& [name, bytes] : art.files) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + name + "' under '" + out_dir + "'");
    out << bytes;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prediction sensitivity analysis toolbox"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string model = "rf";
  std::string mode = "auto";
  std::string rule = "sd";
  std::string tail = "lower";
  std::string unit_test = "containment";

  auto add_common = [&](CLI::App* c) {
    c->add_option("--input", cfg.input_path, "input CSV path")->required();
    c->add_option("--outcome", cfg.outcome, "outcome column name")->required();
    c->add_option("--split-col", cfg.split_column,
                  "column with study/target labels (default: rows with a "
                  "missing outcome form the target split)");
    c->add_option("--model", model, "regressor kind")
        ->check(CLI::IsMember({"bart", "rf"}));
    c->add_option("--trees", cfg.regressor.trees,
                  "ensemble size (0: kind default)");
    c->add_option("--threads", cfg.regressor.threads,
                  "worker threads (0: PREDSENS_THREADS or hardware)");
    c->add_option("--seed", cfg.seed, "master RNG seed");
    c->add_option("--out-dir", cfg.out_dir, "output directory");
    return c;
  };
  auto add_mode = [&](CLI::App* c) {
    c->add_option("--bootstrap", cfg.bootstrap_b, "predictive draws per unit");
    c->add_option("--mode", mode, "draw strategy")
        ->check(CLI::IsMember({"auto", "refit", "direct"}));
  };

  CLI::App* predict = add_common(app.add_subcommand(
      "predict", "fit on study rows, emit per-unit predictions and intervals"));
  add_mode(predict);
  predict->add_option("--interval", cfg.interval_level, "interval level");
  CLI::Option* baseline_opt =
      predict->add_option("--baseline", cfg.density_baseline,
                          "threshold marker for the density export");
  predict->add_option("--bins", cfg.density_bins, "density histogram bins");

  CLI::App* sens = add_common(app.add_subcommand(
      "sensitivity", "synthetic-predictor correlation sweep (original vs augmented fit)"));
  add_mode(sens);
  sens->add_option("--rho-levels", cfg.sensitivity.correlation_levels,
                   "target outcome correlations, comma separated")
      ->delimiter(',');
  sens->add_option("--top-k", cfg.sensitivity.correlate_top_k,
                   "also correlate the synthetic column with the k most important predictors");
  sens->add_option("--holdout", cfg.sensitivity.holdout,
                   "share of study rows held out for metrics");
  sens->add_option("--interval", cfg.sensitivity.interval_level,
                   "per-unit interval level for the stability rule");
  sens->add_option("--metric-ci", cfg.sensitivity.metric_ci_level,
                   "confidence level of the metric intervals");
  sens->add_option("--unit-test", unit_test, "per-unit comparison rule")
      ->check(CLI::IsMember({"containment", "welch"}));

  CLI::App* outliers = add_common(app.add_subcommand(
      "outliers", "flag unusual predictions and describe them with a small tree"));
  add_mode(outliers);
  outliers->add_option("--rule", rule, "deviation rule")
      ->check(CLI::IsMember({"sd", "mad"}));
  outliers->add_option("--k-mult", cfg.outlier.multiplier, "deviation multiplier K");
  outliers->add_option("--tail", tail, "which tail to flag")
      ->check(CLI::IsMember({"lower", "upper", "both"}));
  outliers->add_flag("--pool-by-split", cfg.pool_by_split,
                     "compute center/spread per split instead of jointly");
  outliers->add_option("--tree-depth", cfg.tree_depth, "fit-the-fit depth cap");
  outliers->add_option("--tree-min-leaf", cfg.tree_min_leaf, "fit-the-fit leaf size");

  CLI::App* overlap = add_common(app.add_subcommand(
      "overlap", "study/target membership scores from a logistic model"));
  overlap->add_option("--ridge", cfg.ridge, "IRLS ridge penalty");

  CLI::App* cv = add_common(
      app.add_subcommand("cv", "k-fold cross-validation on the study rows"));
  cv->add_option("--folds", cfg.folds, "fold count");

  CLI::App* crosscv = add_common(app.add_subcommand(
      "crosscv", "train on study folds, test on a target fold via a proxy outcome"));
  crosscv->add_option("--folds", cfg.folds, "fold count");
  crosscv->add_option("--proxy", cfg.proxy, "outcome column observed on both splits")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // flag/usage problems are validation failures
  }

  if (app.got_subcommand(predict)) cfg.command = Command::predict;
  if (app.got_subcommand(sens)) cfg.command = Command::sensitivity;
  if (app.got_subcommand(outliers)) cfg.command = Command::outliers;
  if (app.got_subcommand(overlap)) cfg.command = Command::overlap;
  if (app.got_subcommand(cv)) cfg.command = Command::cv;
  if (app.got_subcommand(crosscv)) cfg.command = Command::crosscv;

  cfg.regressor.kind =
      model == "bart" ? RegressorKind::bart_lite : RegressorKind::random_forest;
  cfg.mode = mode == "refit" ? BootstrapMode::refit
             : mode == "direct" ? BootstrapMode::direct
                                : BootstrapMode::automatic;
  cfg.outlier.kind =
      rule == "mad" ? OutlierKind::mad_from_median : OutlierKind::sd_from_mean;
  cfg.outlier.tail = tail == "upper"  ? OutlierTail::upper
                     : tail == "both" ? OutlierTail::both
                                      : OutlierTail::lower;
  cfg.sensitivity.unit_test = unit_test == "welch" ? UnitTestKind::welch_t
                                                   : UnitTestKind::interval_containment;
  cfg.has_baseline = baseline_opt->count() > 0;

  try {
    const RunArtifacts art = run_command(cfg);
    write_artifacts(art, cfg.out_dir);
    std::cout << "wrote " << (fs::path(cfg.out_dir) / "report.json").string();
    for (const auto& [name, bytes] : art.files) {
      (void)bytes;
      std::cout << ", " << name;
    }
    std::cout << '\n';
    if (!art.envelope.warnings.empty()) {
      std::cout << art.envelope.warnings.size() << " warning(s):\n";
      for (const std::string& w : art.envelope.warnings) std::cout << "  " << w << '\n';
    }
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  }
}
