#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "predsens/dataset.hpp"
#include "predsens/predictive.hpp"
#include "predsens/regressor.hpp"

namespace predsens {

enum class OutlierKind { sd_from_mean, mad_from_median };
enum class OutlierTail { lower, upper, both };

struct OutlierRule {
  OutlierKind kind = OutlierKind::sd_from_mean;
  double multiplier = 2.0;
  OutlierTail tail = OutlierTail::lower;
};

struct OutlierReport {
  std::vector<std::uint8_t> flagged;  // per rule tail
  std::vector<std::uint8_t> low;      // 1 = below the lower cutoff, any tail setting
  double center = 0.0;                // pooled mean or median of the unit means
  double spread = 0.0;                // pooled sd or scaled MAD
  std::vector<std::string> warnings;
};

// Flags units whose mean prediction sits more than K spreads from the pooled
// center. The mad rule scales by 1.4826 so K means the same thing under both
// rules for normal data.
OutlierReport detect_outliers(const PredictiveDistribution& p, const OutlierRule& rule);
OutlierReport detect_outliers(const std::vector<double>& unit_means,
                              const OutlierRule& rule);

struct FitTheFitNode {
  int var = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double low_share = 0.0;
  std::size_t count = 0;
};

struct FitTheFitTree {
  std::vector<FitTheFitNode> nodes;
  std::vector<std::string> predictor_names;
  int max_depth = 3;
  std::size_t min_leaf = 30;

  std::string to_text() const;
  std::string to_dot() const;
};

// Greedy binary classification tree describing which predictors drive the
// low-prediction indicator. A split must both reduce Gini impurity by more
// than 1e-4 and pass a two-proportion z-test at |z| >= 1.96; this gates
// splits on significance without the full conditional-inference machinery.
FitTheFitTree fit_the_fit(const Dataset& d, const std::vector<std::uint8_t>& indicator,
                          int max_depth = 3, std::size_t min_leaf = 30);

struct OverlapReport {
  std::vector<double> score;          // P(study | x), one per dataset row
  std::vector<std::uint8_t> trimmed;  // outside the other split's score range
  std::vector<double> coefficients;   // intercept first, raw predictor scale
  double auc = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

// Logistic regression of split membership on the predictors, fitted by
// ridge-stabilized IRLS. Scores near 0 mark target units unlike any study
// unit (extrapolation risk); trim flags mark units outside the other split's
// score range.
OverlapReport overlap_score(const Dataset& d, double ridge = 1e-6);

struct CvResult {
  std::vector<double> fold_rmse;
  std::vector<double> fold_mae;
  std::vector<double> fold_r2;           // only meaningful where defined
  std::vector<std::uint8_t> r2_defined;  // fold outcome had variance
  double mean_rmse = 0.0;
  double mean_mae = 0.0;
  double mean_r2 = 0.0;  // over the defined folds
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

// k-fold cross-validation over the study rows.
CvResult kfold_cv(const Dataset& d, const RegressorConfig& cfg, int k = 10,
                  std::uint64_t seed = 1);

// Cross-population variant: train on k-1 study folds, evaluate on one target
// fold, using `proxy_outcome` (a column observed on both splits) as the
// outcome. The original outcome and the proxy are excluded from the
// predictors.
CvResult cross_population_cv(const Dataset& d, const std::string& proxy_outcome,
                             const RegressorConfig& cfg, int k = 10,
                             std::uint64_t seed = 1);

}  // namespace predsens
