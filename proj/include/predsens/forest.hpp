#pragma once

#include <vector>

#include "predsens/regressor.hpp"
#include "predsens/tree.hpp"

namespace predsens {

// Bagged regression trees with variance-reduction splits. The training data
// is kept inside the model so bootstrap-refit prediction draws (and
// serialization round trips) remain possible after fitting.
class ForestModel final : public FittedModel {
 public:
  ForestModel(Table x, std::vector<double> y, const RegressorConfig& config);

  RegressorKind kind() const override { return RegressorKind::random_forest; }
  const std::vector<std::string>& predictor_names() const override { return x_.names; }
  const std::vector<double>& variable_importance() const override { return importance_; }
  TrainingSummary training_summary() const override { return summary_; }

  std::vector<double> point_predict(const Table& rows) const override;
  PredictiveDistribution predict_distribution(
      const Table& rows, int b,
      BootstrapMode mode = BootstrapMode::automatic) const override;

  nlohmann::ordered_json to_json() const override;
  static std::unique_ptr<ForestModel> from_json(const nlohmann::ordered_json& blob);

  std::size_t tree_count() const { return trees_.size(); }

 private:
  ForestModel() = default;
  void fit();

  RegressorConfig config_;
  Table x_;
  std::vector<double> y_;
  std::vector<Tree> trees_;
  std::vector<double> importance_;
  TrainingSummary summary_;
};

}  // namespace predsens
