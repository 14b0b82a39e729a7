#include "predsens/report.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "predsens/csv.hpp"
#include "predsens/dataset.hpp"
#include "predsens/errors.hpp"
#include "predsens/table.hpp"

namespace predsens {
namespace {

std::string kind_name(RegressorKind k) {
  return k == RegressorKind::bart_lite ? "bart_lite" : "random_forest";
}

std::string mode_name(BootstrapMode m) {
  switch (m) {
    case BootstrapMode::automatic: return "automatic";
    case BootstrapMode::refit: return "refit";
    case BootstrapMode::direct: return "direct";
  }
  return "automatic";
}

std::string rule_name(OutlierKind k) {
  return k == OutlierKind::sd_from_mean ? "sd" : "mad";
}

std::string tail_name(OutlierTail t) {
  switch (t) {
    case OutlierTail::lower: return "lower";
    case OutlierTail::upper: return "upper";
    case OutlierTail::both: return "both";
  }
  return "lower";
}

std::string unit_test_name(UnitTestKind k) {
  return k == UnitTestKind::interval_containment ? "interval_containment" : "welch_t";
}

std::string split_name(SplitLabel s) {
  return s == SplitLabel::study ? "study" : "target";
}

std::string iso_utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ojson regressor_json(const RegressorConfig& cfg) {
  ojson j;
  j["kind"] = kind_name(cfg.kind);
  j["trees"] = cfg.effective_trees();
  j["threads"] = cfg.threads;
  if (cfg.kind == RegressorKind::bart_lite) {
    j["depth_prior_beta"] = cfg.bart.beta;
    j["depth_prior_eta"] = cfg.bart.eta;
    j["node_scale_q"] = cfg.bart.node_scale_q;
    j["sigma_df"] = cfg.bart.sigma_df;
    j["sigma_quantile"] = cfg.bart.sigma_quantile;
    j["burn_in"] = cfg.bart.burn_in;
    j["draws"] = cfg.bart.draws;
  } else {
    j["mtry"] = cfg.forest.mtry;
    j["min_node"] = cfg.forest.min_node;
    j["bootstrap"] = cfg.forest.bootstrap;
  }
  return j;
}

ojson config_json(const RunConfig& c) {
  ojson j;
  j["command"] = command_name(c.command);
  j["input"] = c.input_path;
  j["outcome"] = c.outcome;
  j["split_column"] = c.split_column;
  j["out_dir"] = c.out_dir;
  j["seed"] = c.seed;
  j["model"] = regressor_json(c.regressor);
  switch (c.command) {
    case Command::predict:
      j["bootstrap_b"] = c.bootstrap_b;
      j["interval_level"] = c.interval_level;
      j["bootstrap_mode"] = mode_name(c.mode);
      if (c.has_baseline) j["density_baseline"] = c.density_baseline;
      j["density_bins"] = c.density_bins;
      break;
    case Command::sensitivity:
      j["correlation_levels"] = c.sensitivity.correlation_levels;
      j["bootstrap_b"] = c.bootstrap_b;
      j["interval_level"] = c.sensitivity.interval_level;
      j["metric_ci_level"] = c.sensitivity.metric_ci_level;
      j["correlate_top_k"] = c.sensitivity.correlate_top_k;
      j["holdout"] = c.sensitivity.holdout;
      j["bootstrap_mode"] = mode_name(c.mode);
      j["unit_test"] = unit_test_name(c.sensitivity.unit_test);
      break;
    case Command::outliers:
      j["bootstrap_b"] = c.bootstrap_b;
      j["bootstrap_mode"] = mode_name(c.mode);
      j["rule"] = rule_name(c.outlier.kind);
      j["k_mult"] = c.outlier.multiplier;
      j["tail"] = tail_name(c.outlier.tail);
      j["pool_by_split"] = c.pool_by_split;
      j["tree_depth"] = c.tree_depth;
      j["tree_min_leaf"] = c.tree_min_leaf;
      break;
    case Command::overlap:
      j["ridge"] = c.ridge;
      break;
    case Command::cv:
      j["folds"] = c.folds;
      break;
    case Command::crosscv:
      j["folds"] = c.folds;
      j["proxy"] = c.proxy;
      break;
  }
  return j;
}

void add_warnings(std::vector<std::string>& sink, const std::string& stage,
                  const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) sink.push_back(stage + ": " + w);
}

std::string csv_from_rows(const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  write_csv_rows(out, rows);
  return out.str();
}

ojson interval_json(const Interval& ci) {
  return ojson{{"lo", ci.lo}, {"hi", ci.hi}};
}

ojson importance_json(const FittedModel& model) {
  ojson j = ojson::object();
  const std::vector<double>& imp = model.variable_importance();
  for (std::size_t i = 0; i < imp.size(); ++i) {
    j[model.predictor_names()[i]] = imp[i];
  }
  return j;
}

ojson sensitivity_payload_json(const SensitivityReport& r, const SensitivitySpec& spec) {
  ojson j;
  j["study_units"] = r.study_units;
  j["eval_units"] = r.eval_units;
  j["predictor_names"] = r.predictor_names;
  j["unit_test"] = unit_test_name(spec.unit_test);
  j["original_training"] = ojson{{"rmse", r.original_training.rmse},
                                 {"r2", r.original_training.r2}};
  ojson levels = ojson::array();
  for (const LevelResult& lv : r.levels) {
    ojson e;
    e["rho"] = lv.rho;
    e["skipped"] = lv.skipped;
    if (lv.skipped) {
      e["skip_reason"] = lv.skip_reason;
      levels.push_back(std::move(e));
      continue;
    }
    e["unit_count"] = lv.unit_count;
    e["flagged_count"] = lv.flagged_count;
    e["flagged_fraction"] = lv.flagged_fraction;
    e["achieved_rho_outcome"] = lv.achieved_rho_outcome;
    e["achieved_rho_predictors"] = lv.achieved_rho_predictors;
    e["tikhonov_shift"] = lv.tikhonov_shift;
    ojson metrics = ojson::array();
    for (const MetricRow& m : lv.metrics) {
      metrics.push_back(ojson{{"metric", m.metric},
                              {"side", m.side},
                              {"estimate", m.estimate},
                              {"ci", interval_json(m.ci)}});
    }
    e["metrics"] = std::move(metrics);
    ojson verdicts = ojson::object();
    for (std::size_t i = 0; i < lv.overlap_metric.size(); ++i) {
      verdicts[lv.overlap_metric[i]] = static_cast<bool>(lv.overlap_verdict[i]);
    }
    e["ci_overlap"] = std::move(verdicts);
    e["warnings"] = lv.warnings;
    levels.push_back(std::move(e));
  }
  j["levels"] = std::move(levels);
  return j;
}

ojson tree_node_json(const FitTheFitTree& tree, int idx) {
  const FitTheFitNode& node = tree.nodes[static_cast<std::size_t>(idx)];
  ojson j;
  if (node.var < 0) {
    j["leaf"] = true;
    j["count"] = node.count;
    j["low_share"] = node.low_share;
    return j;
  }
  j["leaf"] = false;
  j["predictor"] = tree.predictor_names[static_cast<std::size_t>(node.var)];
  j["threshold"] = node.threshold;
  j["count"] = node.count;
  j["left"] = tree_node_json(tree, node.left);
  j["right"] = tree_node_json(tree, node.right);
  return j;
}

struct OutlierRun {
  std::vector<std::uint8_t> flagged;
  std::vector<std::uint8_t> low;
  ojson stats;  // center/spread, either joint or per split
  std::vector<std::string> warnings;
};

OutlierRun run_outlier_rule(const std::vector<double>& means,
                            const std::vector<SplitLabel>& split,
                            const OutlierRule& rule, bool pool_by_split) {
  OutlierRun out;
  if (!pool_by_split) {
    const OutlierReport rep = detect_outliers(means, rule);
    out.flagged = rep.flagged;
    out.low = rep.low;
    out.stats = ojson{{"pooling", "joint"}, {"center", rep.center}, {"spread", rep.spread}};
    out.warnings = rep.warnings;
    return out;
  }
  out.flagged.assign(means.size(), 0);
  out.low.assign(means.size(), 0);
  out.stats = ojson{{"pooling", "per_split"}};
  for (SplitLabel side : {SplitLabel::study, SplitLabel::target}) {
    std::vector<std::size_t> rows;
    std::vector<double> side_means;
    for (std::size_t i = 0; i < split.size(); ++i) {
      if (split[i] == side) {
        rows.push_back(i);
        side_means.push_back(means[i]);
      }
    }
    if (rows.empty()) {
      throw ValidationError("outliers: per-split pooling needs both splits nonempty");
    }
    const OutlierReport rep = detect_outliers(side_means, rule);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      out.flagged[rows[k]] = rep.flagged[k];
      out.low[rows[k]] = rep.low[k];
    }
    out.stats[split_name(side)] = ojson{{"center", rep.center}, {"spread", rep.spread}};
    add_warnings(out.warnings, split_name(side), rep.warnings);
  }
  return out;
}

}  // namespace

std::string command_name(Command c) {
  switch (c) {
    case Command::predict: return "predict";
    case Command::sensitivity: return "sensitivity";
    case Command::outliers: return "outliers";
    case Command::overlap: return "overlap";
    case Command::cv: return "cv";
    case Command::crosscv: return "crosscv";
  }
  return "predict";
}

Command parse_command(const std::string& name) {
  if (name == "predict") return Command::predict;
  if (name == "sensitivity") return Command::sensitivity;
  if (name == "outliers") return Command::outliers;
  if (name == "overlap") return Command::overlap;
  if (name == "cv") return Command::cv;
  if (name == "crosscv") return Command::crosscv;
  throw ValidationError("unknown command '" + name + "'");
}

std::string digest_bytes(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::string input_digest(const std::string& path) {
  return digest_bytes(read_file_bytes(path));
}

ojson ReportEnvelope::to_json() const {
  ojson j;
  j["schema_version"] = schema_version;
  j["generated_at"] = generated_at;
  j["input"] = input;
  j["config"] = config;
  j["payload"] = payload;
  j["warnings"] = warnings;
  return j;
}

std::string metrics_long_csv(const SensitivityReport& report) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"rho", "metric", "side", "estimate", "lo", "hi"});
  for (const LevelResult& lv : report.levels) {
    if (lv.skipped) continue;
    for (const MetricRow& m : lv.metrics) {
      rows.push_back({format_double(lv.rho), m.metric, m.side,
                      format_double(m.estimate), format_double(m.ci.lo),
                      format_double(m.ci.hi)});
    }
  }
  return csv_from_rows(rows);
}

std::string density_csv(const std::vector<double>& means,
                        const std::vector<SplitLabel>& split, int bins,
                        const double* baseline) {
  if (bins < 1) throw ValidationError("density_csv: bins must be >= 1");
  if (means.empty() || means.size() != split.size()) {
    throw ValidationError("density_csv: means/split size mismatch");
  }
  double lo = means[0], hi = means[0];
  for (double v : means) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;
  std::vector<std::size_t> study_count(static_cast<std::size_t>(bins), 0);
  std::vector<std::size_t> target_count(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < means.size(); ++i) {
    auto b = static_cast<std::size_t>((means[i] - lo) / width);
    b = std::min(b, static_cast<std::size_t>(bins - 1));  // max lands in last bin
    if (split[i] == SplitLabel::study) ++study_count[b];
    else ++target_count[b];
  }
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"bin_lo", "bin_hi", "study_count", "target_count"};
  if (baseline != nullptr) header.push_back("contains_baseline");
  rows.push_back(std::move(header));
  for (int b = 0; b < bins; ++b) {
    const double a = lo + b * width;
    const double z = b + 1 == bins ? hi : lo + (b + 1) * width;
    std::vector<std::string> row{format_double(a), format_double(z),
                                 std::to_string(study_count[static_cast<std::size_t>(b)]),
                                 std::to_string(target_count[static_cast<std::size_t>(b)])};
    if (baseline != nullptr) {
      const bool inside = *baseline >= a && (*baseline < z || b + 1 == bins);
      row.push_back(inside ? "1" : "0");
    }
    rows.push_back(std::move(row));
  }
  return csv_from_rows(rows);
}

ojson model_payload_json(const FittedModel& model) {
  ojson j;
  j["kind"] = kind_name(model.kind());
  j["training"] = ojson{{"rmse", model.training_summary().rmse},
                        {"r2", model.training_summary().r2}};
  j["importance"] = importance_json(model);
  return j;
}

ojson cv_payload_json(const CvResult& cv) {
  ojson j;
  j["folds"] = cv.k;
  j["fold_rmse"] = cv.fold_rmse;
  j["fold_mae"] = cv.fold_mae;
  ojson r2 = ojson::array();
  for (std::size_t f = 0; f < cv.fold_r2.size(); ++f) {
    if (cv.r2_defined[f]) r2.push_back(cv.fold_r2[f]);
    else r2.push_back(nullptr);  // undefined fold reported as missing
  }
  j["fold_r2"] = std::move(r2);
  j["mean_rmse"] = cv.mean_rmse;
  j["mean_mae"] = cv.mean_mae;
  j["mean_r2"] = cv.mean_r2;
  return j;
}

RunArtifacts run_command(const RunConfig& config) {
  const std::string raw = read_file_bytes(config.input_path);
  std::istringstream stream(raw);
  LoadOptions opt;
  opt.outcome = config.outcome;
  opt.split_column = config.split_column;
  Dataset d = load_csv(stream, opt);
  const ImputeReport imputed = impute_simple(d);

  RunArtifacts out;
  ReportEnvelope& env = out.envelope;
  env.generated_at = iso_utc_now();
  env.config = config_json(config);

  std::size_t filled = 0;
  ojson imputed_json = ojson::object();
  for (std::size_t c = 0; c < imputed.column.size(); ++c) {
    if (imputed.filled[c] > 0) imputed_json[imputed.column[c]] = imputed.filled[c];
    filled += imputed.filled[c];
  }
  env.input = ojson{{"path", config.input_path},
                    {"digest", digest_bytes(raw)},
                    {"rows", d.n_rows()},
                    {"predictors", d.n_predictors()},
                    {"study_rows", d.study_rows().size()},
                    {"target_rows", d.target_rows().size()},
                    {"imputed_cells", filled},
                    {"imputed_by_column", imputed_json}};

  RegressorConfig model_cfg = config.regressor;
  model_cfg.seed = config.seed;

  const std::vector<std::size_t> study = d.study_rows();
  std::vector<std::size_t> all(d.n_rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  switch (config.command) {
    case Command::predict: {
      const Table x_train = predictor_table(d, study);
      const std::vector<double> y_train = outcome_values(d, study);
      const auto model = fit_regressor(x_train, y_train, model_cfg);
      const Table x_all = predictor_table(d, all);
      const PredictiveDistribution dist =
          model->predict_distribution(x_all, config.bootstrap_b, config.mode);
      const std::vector<double> means = dist.unit_means();

      ojson units = ojson::array();
      std::vector<std::vector<std::string>> pred_rows;
      pred_rows.push_back({"row", "split", "mean", "lo", "hi"});
      for (std::size_t i = 0; i < d.n_rows(); ++i) {
        const Interval ci = dist.unit_interval(i, config.interval_level);
        units.push_back(ojson{{"row", i},
                              {"split", split_name(d.split[i])},
                              {"mean", means[i]},
                              {"lo", ci.lo},
                              {"hi", ci.hi}});
        pred_rows.push_back({std::to_string(i), split_name(d.split[i]),
                             format_double(means[i]), format_double(ci.lo),
                             format_double(ci.hi)});
      }
      env.payload["model"] = model_payload_json(*model);
      env.payload["draws"] = dist.n_draws();
      env.payload["interval_level"] = config.interval_level;
      env.payload["units"] = std::move(units);
      out.files.emplace_back("predictions.csv", csv_from_rows(pred_rows));
      const double* base = config.has_baseline ? &config.density_baseline : nullptr;
      out.files.emplace_back("prediction_density.csv",
                             density_csv(means, d.split, config.density_bins, base));
      break;
    }
    case Command::sensitivity: {
      SensitivitySpec spec = config.sensitivity;
      spec.regressor = config.regressor;
      spec.regressor.seed = config.seed;
      spec.seed = config.seed;
      spec.bootstrap_b = config.bootstrap_b;
      spec.mode = config.mode;
      const SensitivityReport report = run_sensitivity(d, spec);
      env.payload = sensitivity_payload_json(report, spec);
      add_warnings(env.warnings, "sensitivity", report.warnings);
      for (const LevelResult& lv : report.levels) {
        add_warnings(env.warnings, "level rho=" + format_double(lv.rho), lv.warnings);
        if (lv.skipped) {
          env.warnings.push_back("level rho=" + format_double(lv.rho) +
                                 ": skipped (" + lv.skip_reason + ")");
        }
      }
      out.files.emplace_back("metrics_long.csv", metrics_long_csv(report));
      std::vector<std::vector<std::string>> lvl;
      lvl.push_back({"rho", "skipped", "unit_count", "flagged_count", "flagged_fraction",
                     "rmse_ci_overlap", "achieved_rho_outcome", "tikhonov_shift"});
      for (const LevelResult& r : report.levels) {
        std::string rmse_overlap;
        for (std::size_t i = 0; i < r.overlap_metric.size(); ++i) {
          if (r.overlap_metric[i] == "rmse") rmse_overlap = r.overlap_verdict[i] ? "1" : "0";
        }
        lvl.push_back({format_double(r.rho), r.skipped ? "1" : "0",
                       std::to_string(r.unit_count), std::to_string(r.flagged_count),
                       format_double(r.flagged_fraction), rmse_overlap,
                       format_double(r.achieved_rho_outcome),
                       format_double(r.tikhonov_shift)});
      }
      out.files.emplace_back("level_summary.csv", csv_from_rows(lvl));
      break;
    }
    case Command::outliers: {
      const Table x_train = predictor_table(d, study);
      const std::vector<double> y_train = outcome_values(d, study);
      const auto model = fit_regressor(x_train, y_train, model_cfg);
      const Table x_all = predictor_table(d, all);
      const PredictiveDistribution dist =
          model->predict_distribution(x_all, config.bootstrap_b, config.mode);
      const std::vector<double> means = dist.unit_means();
      const OutlierRun run =
          run_outlier_rule(means, d.split, config.outlier, config.pool_by_split);
      add_warnings(env.warnings, "outliers", run.warnings);

      std::size_t n_flagged = 0, n_low = 0;
      std::vector<std::vector<std::string>> flag_rows;
      flag_rows.push_back({"row", "split", "mean", "flagged", "low"});
      for (std::size_t i = 0; i < means.size(); ++i) {
        n_flagged += run.flagged[i];
        n_low += run.low[i];
        flag_rows.push_back({std::to_string(i), split_name(d.split[i]),
                             format_double(means[i]), run.flagged[i] ? "1" : "0",
                             run.low[i] ? "1" : "0"});
      }
      const FitTheFitTree tree =
          fit_the_fit(d, run.low, config.tree_depth, config.tree_min_leaf);

      env.payload["model"] = model_payload_json(*model);
      env.payload["rule"] = ojson{{"kind", rule_name(config.outlier.kind)},
                                  {"multiplier", config.outlier.multiplier},
                                  {"tail", tail_name(config.outlier.tail)}};
      env.payload["statistics"] = run.stats;
      env.payload["units"] = means.size();
      env.payload["flagged_count"] = n_flagged;
      env.payload["flagged_fraction"] =
          static_cast<double>(n_flagged) / static_cast<double>(means.size());
      env.payload["low_count"] = n_low;
      env.payload["fit_the_fit"] = tree_node_json(tree, 0);
      out.files.emplace_back("outlier_flags.csv", csv_from_rows(flag_rows));
      out.files.emplace_back("fit_the_fit.txt", tree.to_text());
      out.files.emplace_back("fit_the_fit.dot", tree.to_dot());
      break;
    }
    case Command::overlap: {
      const OverlapReport report = overlap_score(d, config.ridge);
      add_warnings(env.warnings, "overlap", report.warnings);
      std::size_t trimmed = 0;
      std::vector<std::vector<std::string>> score_rows;
      score_rows.push_back({"row", "split", "score", "trimmed"});
      for (std::size_t i = 0; i < report.score.size(); ++i) {
        trimmed += report.trimmed[i];
        score_rows.push_back({std::to_string(i), split_name(d.split[i]),
                              format_double(report.score[i]),
                              report.trimmed[i] ? "1" : "0"});
      }
      ojson coef = ojson::object();
      coef["(intercept)"] = report.coefficients[0];
      const std::vector<int> pred_idx = d.predictor_indexes();
      for (std::size_t p = 0; p < pred_idx.size(); ++p) {
        coef[d.columns[static_cast<std::size_t>(pred_idx[p])].name] =
            report.coefficients[p + 1];
      }
      env.payload["auc"] = report.auc;
      env.payload["converged"] = report.converged;
      env.payload["iterations"] = report.iterations;
      env.payload["ridge"] = config.ridge;
      env.payload["coefficients"] = std::move(coef);
      env.payload["trimmed_count"] = trimmed;
      env.payload["trimmed_fraction"] =
          static_cast<double>(trimmed) / static_cast<double>(report.score.size());
      out.files.emplace_back("overlap_scores.csv", csv_from_rows(score_rows));
      break;
    }
    case Command::cv: {
      const CvResult cv = kfold_cv(d, model_cfg, config.folds, config.seed);
      add_warnings(env.warnings, "cv", cv.warnings);
      env.payload = cv_payload_json(cv);
      env.payload["model"] = regressor_json(model_cfg);
      break;
    }
    case Command::crosscv: {
      const CvResult cv =
          cross_population_cv(d, config.proxy, model_cfg, config.folds, config.seed);
      add_warnings(env.warnings, "crosscv", cv.warnings);
      env.payload = cv_payload_json(cv);
      env.payload["proxy"] = config.proxy;
      env.payload["model"] = regressor_json(model_cfg);
      break;
    }
  }
  return out;
}

}  // namespace predsens
