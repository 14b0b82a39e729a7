#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "predsens/dataset.hpp"
#include "predsens/regressor.hpp"
#include "predsens/stats.hpp"
#include "predsens/synth.hpp"
#include "predsens/table.hpp"

namespace predsens {

// How a unit's augmented prediction is compared against the original model's
// predictive draws. The default asks whether the augmented mean falls inside
// the original draws' central interval; the t-test variant runs a Welch test
// between the two draw sets instead.
enum class UnitTestKind { interval_containment, welch_t };

struct SensitivitySpec {
  std::vector<double> correlation_levels{0.1, 0.2, 0.3, 0.4, 0.5};
  int bootstrap_b = 100;
  double interval_level = 0.95;
  double metric_ci_level = 0.99;
  int correlate_top_k = 0;  // 0 keeps all synthetic-predictor correlations at zero
  RegressorConfig regressor;
  std::uint64_t seed = 1;
  double holdout = 0.2;  // share of study rows reserved for metric evaluation
  BootstrapMode mode = BootstrapMode::automatic;
  UnitTestKind unit_test = UnitTestKind::interval_containment;
};

// Study-row predictor matrix with the synthetic column prepended. The base
// predictor columns are copied verbatim; only the first column is new.
struct AugmentedDataset {
  Table predictors;             // [synthetic, X...]
  std::size_t synthetic_col = 0;
};

AugmentedDataset make_augmented(const Table& study_predictors,
                                const std::vector<double>& synthetic,
                                const std::string& name = "__synthetic__");

// Bootstrap draws of the evaluation metrics for one model side plus the
// pieces the closed-form R2 interval needs.
struct MetricDraws {
  std::vector<double> rmse;  // one value per prediction draw
  std::vector<double> mae;
  double pooled_r2 = 0.0;    // from the per-unit mean predictions
  std::size_t n_eval = 0;
  std::size_t k = 0;  // predictor count of the model
};

struct MetricRow {
  std::string metric;  // rmse | mae | r2 | r2_adjusted
  std::string side;    // original | augmented
  double estimate = 0.0;
  Interval ci{0.0, 0.0};
};

struct LevelResult {
  double rho = 0.0;
  bool skipped = false;
  std::string skip_reason;
  std::size_t unit_count = 0;
  std::size_t flagged_count = 0;
  double flagged_fraction = 0.0;
  std::vector<MetricRow> metrics;
  // CI-overlap verdicts per metric name, e.g. rmse -> true means "not
  // statistically different".
  std::vector<std::string> overlap_metric;
  std::vector<bool> overlap_verdict;
  double achieved_rho_outcome = 0.0;
  std::vector<double> achieved_rho_predictors;
  double tikhonov_shift = 0.0;
  std::vector<std::string> warnings;
};

struct SensitivityReport {
  std::vector<LevelResult> levels;
  TrainingSummary original_training;
  std::vector<std::string> predictor_names;
  std::size_t study_units = 0;
  std::size_t eval_units = 0;
  std::vector<std::string> warnings;
};

// Full correlation sweep: fits the original model once, then per level
// generates a synthetic predictor, fits the augmented model, flags units
// whose augmented mean prediction escapes the original model's interval and
// compares bootstrap metric intervals. Levels whose target correlation
// matrix cannot be factorized are reported as skipped.
SensitivityReport run_sensitivity(const Dataset& d, const SensitivitySpec& spec);

// Per-draw evaluation metrics of one fitted model on a fixed eval fold.
MetricDraws metric_draws(const FittedModel& model, const Table& x_eval,
                         const std::vector<double>& y_eval, int b, BootstrapMode mode);

// The per-unit stability rule: containment checks whether the augmented mean
// falls outside the original draws' central interval; the Welch variant
// compares the two draw means. Exposed so the rule can be calibrated against
// known distributions directly.
bool unit_flagged(const PredictiveDistribution& orig, const PredictiveDistribution& aug,
                  std::size_t unit, UnitTestKind kind, double level);

// Builds the eight metric rows (four metrics, two sides) with their
// intervals: percentile intervals across draws for rmse/mae, a closed-form
// normal-approximation interval for r2, and the adjusted-r2 transform of the
// r2 interval.
std::vector<MetricRow> compare_metrics(const MetricDraws& orig, const MetricDraws& aug,
                                       double ci_level);

// Correlation spec for the robustness variant: rho on the outcome and on the
// k predictors the fitted model ranks highest, zero elsewhere.
CorrelationSpec top_k_correlated_spec(const FittedModel& model, int k, double rho);

// 1 - (1 - r2) (n - 1) / (n - k - 1); requires n > k + 1.
double adjusted_r2(double r2, std::size_t n, std::size_t k);

// Large-sample standard error of R2 (Cohen's approximation). Negative r2 is
// treated as 0, where the formula degenerates to zero width.
double r2_standard_error(double r2, std::size_t n, std::size_t k);

}  // namespace predsens
