#include "predsens/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "predsens/errors.hpp"
#include "predsens/rng.hpp"

namespace predsens {
namespace {

constexpr std::uint64_t kSplitStream = 301;
constexpr std::uint64_t kOrigStream = 302;
constexpr std::uint64_t kAugStream = 303;
constexpr std::uint64_t kSynthStream = 304;

void validate_spec(const SensitivitySpec& spec, std::size_t p) {
  if (spec.correlation_levels.empty()) {
    throw ValidationError("sensitivity: correlation_levels is empty");
  }
  for (double rho : spec.correlation_levels) {
    if (!(std::abs(rho) < 1.0)) {
      throw ValidationError("sensitivity: correlation level " +
                            std::to_string(rho) + " is outside (-1, 1)");
    }
  }
  std::vector<double> sorted = spec.correlation_levels;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("sensitivity: correlation levels must be distinct");
  }
  if (spec.bootstrap_b < 2) {
    throw ValidationError("sensitivity: bootstrap_b must be at least 2");
  }
  if (!(spec.interval_level > 0.0 && spec.interval_level < 1.0)) {
    throw ValidationError("sensitivity: interval_level must be inside (0, 1)");
  }
  if (!(spec.metric_ci_level > 0.0 && spec.metric_ci_level < 1.0)) {
    throw ValidationError("sensitivity: metric_ci_level must be inside (0, 1)");
  }
  if (!(spec.holdout > 0.0 && spec.holdout < 1.0)) {
    throw ValidationError("sensitivity: holdout share must be inside (0, 1)");
  }
  if (spec.correlate_top_k < 0 || static_cast<std::size_t>(spec.correlate_top_k) > p) {
    throw ValidationError("sensitivity: correlate_top_k exceeds the predictor count");
  }
}

// Per-draw metrics extracted from a distribution that covers all study
// units; `eval_pos` selects the held-out units.
MetricDraws draws_from_distribution(const PredictiveDistribution& dist,
                                    const std::vector<std::size_t>& eval_pos,
                                    const std::vector<double>& y_eval,
                                    std::size_t k) {
  MetricDraws out;
  out.n_eval = eval_pos.size();
  out.k = k;
  const std::size_t b = dist.n_draws();
  out.rmse.resize(b);
  out.mae.resize(b);
  for (std::size_t draw = 0; draw < b; ++draw) {
    double sse = 0.0;
    double sae = 0.0;
    for (std::size_t i = 0; i < eval_pos.size(); ++i) {
      const double d = dist.at(eval_pos[i], draw) - y_eval[i];
      sse += d * d;
      sae += std::abs(d);
    }
    out.rmse[draw] = std::sqrt(sse / static_cast<double>(eval_pos.size()));
    out.mae[draw] = sae / static_cast<double>(eval_pos.size());
  }

  double sse = 0.0;
  for (std::size_t i = 0; i < eval_pos.size(); ++i) {
    const double d = dist.unit_mean(eval_pos[i]) - y_eval[i];
    sse += d * d;
  }
  const double sst =
      variance(y_eval) * static_cast<double>(y_eval.size() - 1);
  out.pooled_r2 = sst > 0.0 ? 1.0 - sse / sst : 0.0;
  return out;
}

MetricRow percentile_row(const std::string& name, const std::string& side,
                         const std::vector<double>& draws, double ci_level) {
  const double alpha = 1.0 - ci_level;
  MetricRow row;
  row.metric = name;
  row.side = side;
  row.estimate = median(draws);
  row.ci = Interval{quantile(draws, alpha / 2.0), quantile(draws, 1.0 - alpha / 2.0)};
  return row;
}

}  // namespace

double adjusted_r2(double r2, std::size_t n, std::size_t k) {
  if (n <= k + 1) {
    throw ValidationError("adjusted_r2: need more rows than predictors plus one");
  }
  return 1.0 - (1.0 - r2) * static_cast<double>(n - 1) /
                   static_cast<double>(n - k - 1);
}

double r2_standard_error(double r2, std::size_t n, std::size_t k) {
  if (n <= k + 1) {
    throw ValidationError("r2_standard_error: need more rows than predictors plus one");
  }
  const double r = std::max(r2, 0.0);
  const double nn = static_cast<double>(n);
  const double dof = static_cast<double>(n - k - 1);
  return std::sqrt(4.0 * r * (1.0 - r) * (1.0 - r) * dof * dof /
                   ((nn * nn - 1.0) * (nn + 3.0)));
}

std::vector<MetricRow> compare_metrics(const MetricDraws& orig, const MetricDraws& aug,
                                       double ci_level) {
  if (orig.rmse.size() < 2 || aug.rmse.size() < 2) {
    throw ValidationError("compare_metrics: need at least 2 metric draws per side");
  }
  if (!(ci_level > 0.0 && ci_level < 1.0)) {
    throw ValidationError("compare_metrics: ci level must be inside (0, 1)");
  }
  const double z = normal_quantile(1.0 - (1.0 - ci_level) / 2.0);

  std::vector<MetricRow> rows;
  rows.push_back(percentile_row("rmse", "original", orig.rmse, ci_level));
  rows.push_back(percentile_row("rmse", "augmented", aug.rmse, ci_level));
  rows.push_back(percentile_row("mae", "original", orig.mae, ci_level));
  rows.push_back(percentile_row("mae", "augmented", aug.mae, ci_level));

  for (const MetricDraws* side : {&orig, &aug}) {
    MetricRow row;
    row.metric = "r2";
    row.side = side == &orig ? "original" : "augmented";
    row.estimate = side->pooled_r2;
    const double se = r2_standard_error(side->pooled_r2, side->n_eval, side->k);
    row.ci = Interval{side->pooled_r2 - z * se, side->pooled_r2 + z * se};
    rows.push_back(row);
  }
  for (const MetricDraws* side : {&orig, &aug}) {
    const MetricRow& base = rows[side == &orig ? 4 : 5];
    MetricRow row;
    row.metric = "r2_adjusted";
    row.side = base.side;
    // The adjustment is a strictly increasing affine map of r2, so applying
    // it to the interval endpoints keeps a valid interval.
    row.estimate = adjusted_r2(base.estimate, side->n_eval, side->k);
    row.ci = Interval{adjusted_r2(base.ci.lo, side->n_eval, side->k),
                      adjusted_r2(base.ci.hi, side->n_eval, side->k)};
    rows.push_back(row);
  }
  return rows;
}

CorrelationSpec top_k_correlated_spec(const FittedModel& model, int k, double rho) {
  const std::vector<double>& importance = model.variable_importance();
  if (k < 0 || static_cast<std::size_t>(k) > importance.size()) {
    throw ValidationError("top_k_correlated_spec: k exceeds the predictor count");
  }
  CorrelationSpec spec;
  spec.rho_outcome = rho;
  spec.rho_predictors.assign(importance.size(), 0.0);
  std::vector<std::size_t> order(importance.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return importance[a] > importance[b];
  });
  for (int i = 0; i < k; ++i) spec.rho_predictors[order[static_cast<std::size_t>(i)]] = rho;
  return spec;
}

AugmentedDataset make_augmented(const Table& study_predictors,
                                const std::vector<double>& synthetic,
                                const std::string& name) {
  if (synthetic.size() != study_predictors.n_rows()) {
    throw ValidationError("make_augmented: synthetic column length mismatch");
  }
  for (const std::string& existing : study_predictors.names) {
    if (existing == name) {
      throw ValidationError("make_augmented: column '" + name + "' already exists");
    }
  }
  AugmentedDataset out;
  out.predictors = study_predictors.with_column_front(name, synthetic);
  out.synthetic_col = 0;
  return out;
}

bool unit_flagged(const PredictiveDistribution& orig, const PredictiveDistribution& aug,
                  std::size_t unit, UnitTestKind kind, double level) {
  if (kind == UnitTestKind::interval_containment) {
    return !orig.unit_interval(unit, level).contains(aug.unit_mean(unit));
  }
  const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
  const double vo = orig.unit_sd(unit) * orig.unit_sd(unit);
  const double va = aug.unit_sd(unit) * aug.unit_sd(unit);
  const double se = std::sqrt(vo / static_cast<double>(orig.n_draws()) +
                              va / static_cast<double>(aug.n_draws()));
  const double gap = aug.unit_mean(unit) - orig.unit_mean(unit);
  return se > 0.0 ? std::abs(gap) / se >= z : gap != 0.0;
}

MetricDraws metric_draws(const FittedModel& model, const Table& x_eval,
                         const std::vector<double>& y_eval, int b,
                         BootstrapMode mode) {
  if (x_eval.n_rows() != y_eval.size()) {
    throw ValidationError("metric_draws: row count mismatch");
  }
  PredictiveDistribution dist = model.predict_distribution(x_eval, b, mode);
  std::vector<std::size_t> all(x_eval.n_rows());
  std::iota(all.begin(), all.end(), 0);
  return draws_from_distribution(dist, all, y_eval, model.predictor_names().size());
}

SensitivityReport run_sensitivity(const Dataset& d, const SensitivitySpec& spec) {
  const std::vector<std::size_t> study = d.study_rows();
  const Table x_study = predictor_table(d, study);
  const std::vector<double> y_study = outcome_values(d, study);
  const std::size_t n = study.size();
  const std::size_t p = x_study.n_cols();
  validate_spec(spec, p);

  // Fixed train/eval partition of the study rows: metrics always refer to
  // the same held-out fold so their draws reflect model variability only.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng split_rng(derive_seed(spec.seed, {kSplitStream}));
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(perm[i], perm[split_rng.uniform_int(i + 1)]);
  }
  std::size_t n_eval = static_cast<std::size_t>(
      std::llround(spec.holdout * static_cast<double>(n)));
  n_eval = std::max<std::size_t>(n_eval, 1);
  if (n_eval + 10 > n) {
    throw ValidationError("sensitivity: too few study rows for the holdout split");
  }
  std::vector<std::size_t> eval_pos(perm.begin(), perm.begin() + n_eval);
  std::vector<std::size_t> train_pos(perm.begin() + n_eval, perm.end());
  std::sort(eval_pos.begin(), eval_pos.end());
  std::sort(train_pos.begin(), train_pos.end());
  if (n_eval <= p + 2) {
    throw ValidationError(
        "sensitivity: evaluation fold smaller than predictor count + 3; "
        "increase holdout or supply more study rows");
  }

  const Table x_train = x_study.subset(train_pos);
  std::vector<double> y_train(train_pos.size());
  for (std::size_t i = 0; i < train_pos.size(); ++i) y_train[i] = y_study[train_pos[i]];
  std::vector<double> y_eval(eval_pos.size());
  for (std::size_t i = 0; i < eval_pos.size(); ++i) y_eval[i] = y_study[eval_pos[i]];

  RegressorConfig orig_cfg = spec.regressor;
  orig_cfg.seed = derive_seed(spec.seed, {kOrigStream});
  const auto original = fit_regressor(x_train, y_train, orig_cfg);

  const PredictiveDistribution orig_dist =
      original->predict_distribution(x_study, spec.bootstrap_b, spec.mode);
  const MetricDraws orig_metrics =
      draws_from_distribution(orig_dist, eval_pos, y_eval, p);

  SensitivityReport report;
  report.original_training = original->training_summary();
  report.predictor_names = x_study.names;
  report.study_units = n;
  report.eval_units = n_eval;

  for (std::size_t li = 0; li < spec.correlation_levels.size(); ++li) {
    LevelResult level;
    level.rho = spec.correlation_levels[li];
    level.unit_count = n;

    CorrelationSpec corr;
    if (spec.correlate_top_k > 0) {
      corr = top_k_correlated_spec(*original, spec.correlate_top_k, level.rho);
    } else {
      corr.rho_outcome = level.rho;
    }
    corr.seed = derive_seed(spec.seed, {kSynthStream, li});

    SynthResult synth;
    try {
      synth = generate_synthetic(d, corr);
    } catch (const NumericError& e) {
      level.skipped = true;
      level.skip_reason = e.what();
      report.levels.push_back(std::move(level));
      continue;
    }
    level.achieved_rho_outcome = synth.achieved_rho_outcome;
    level.achieved_rho_predictors = synth.achieved_rho_predictors;
    level.tikhonov_shift = synth.shift_used;
    level.warnings = synth.warnings;

    const AugmentedDataset aug = make_augmented(x_study, synth.r);
    const Table aug_train = aug.predictors.subset(train_pos);
    RegressorConfig aug_cfg = spec.regressor;
    aug_cfg.seed = derive_seed(spec.seed, {kAugStream, li});
    const auto augmented = fit_regressor(aug_train, y_train, aug_cfg);

    const PredictiveDistribution aug_dist =
        augmented->predict_distribution(aug.predictors, spec.bootstrap_b, spec.mode);

    std::size_t flagged = 0;
    for (std::size_t u = 0; u < n; ++u) {
      if (unit_flagged(orig_dist, aug_dist, u, spec.unit_test, spec.interval_level)) {
        ++flagged;
      }
    }
    level.flagged_count = flagged;
    level.flagged_fraction = static_cast<double>(flagged) / static_cast<double>(n);

    const MetricDraws aug_metrics =
        draws_from_distribution(aug_dist, eval_pos, y_eval, p + 1);
    level.metrics = compare_metrics(orig_metrics, aug_metrics, spec.metric_ci_level);
    for (const char* name : {"rmse", "mae", "r2", "r2_adjusted"}) {
      const MetricRow* o = nullptr;
      const MetricRow* a = nullptr;
      for (const MetricRow& row : level.metrics) {
        if (row.metric != name) continue;
        (row.side == "original" ? o : a) = &row;
      }
      level.overlap_metric.push_back(name);
      level.overlap_verdict.push_back(!o->ci.disjoint_from(a->ci));
    }

    report.levels.push_back(std::move(level));
  }
  return report;
}

}  // namespace predsens
