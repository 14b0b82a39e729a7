#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "predsens/predictive.hpp"
#include "predsens/table.hpp"

namespace predsens {

enum class RegressorKind { bart_lite, random_forest };

// How predict_distribution turns an ensemble into b draws. `automatic` uses
// the cheap per-tree path for forests whenever b does not exceed the tree
// count and full bootstrap refits otherwise; `refit` forces refits; `direct`
// forces the per-tree path. The distinction only matters for forests; the
// sampler-based model always returns posterior draws.
enum class BootstrapMode { automatic, refit, direct };

struct BartParams {
  double beta = 0.95;         // depth prior: P(split at depth d) = beta (1+d)^(-eta)
  double eta = 2.0;
  double node_scale_q = 0.0;  // q in sigma_q = sigma0 / sqrt(q); 0 means "tree count"
  double sigma_df = 3.0;      // nu of the inverse-gamma variance prior
  double sigma_quantile = 0.9;
  int burn_in = 250;
  int draws = 1000;
};

struct ForestParams {
  int mtry = 0;  // 0 means ceil(P / 3)
  int min_node = 5;
  bool bootstrap = true;
};

struct RegressorConfig {
  RegressorKind kind = RegressorKind::random_forest;
  int trees = 0;  // 0 means the kind's default: 50 sampler trees, 500 forest trees
  BartParams bart;
  ForestParams forest;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 means resolve_threads default

  int effective_trees() const {
    if (trees > 0) return trees;
    return kind == RegressorKind::bart_lite ? 50 : 500;
  }
};

struct TrainingSummary {
  double rmse = 0.0;
  double r2 = 0.0;
};

class FittedModel {
 public:
  virtual ~FittedModel() = default;

  virtual RegressorKind kind() const = 0;
  virtual const std::vector<std::string>& predictor_names() const = 0;
  // Normalized to sum 1: split-count share for the sampler, total SSE
  // reduction share for the forest.
  virtual const std::vector<double>& variable_importance() const = 0;
  virtual TrainingSummary training_summary() const = 0;

  // Noise-suppressed mean prediction.
  virtual std::vector<double> point_predict(const Table& rows) const = 0;
  // b prediction draws per row. Deterministic given the fitted state.
  virtual PredictiveDistribution predict_distribution(
      const Table& rows, int b, BootstrapMode mode = BootstrapMode::automatic) const = 0;

  virtual nlohmann::ordered_json to_json() const = 0;

 protected:
  void check_schema(const Table& rows) const;
};

// Fits the configured regressor. The outcome must have positive variance.
// Takes its arguments by value because the model keeps the training data.
std::unique_ptr<FittedModel> fit_regressor(Table x, std::vector<double> y,
                                           const RegressorConfig& config);

// Inverse of FittedModel::to_json.
std::unique_ptr<FittedModel> model_from_json(const nlohmann::ordered_json& blob);

// Split probability of the sampler's depth prior, exposed for inspection.
double depth_split_probability(int depth, double beta, double eta);

}  // namespace predsens
