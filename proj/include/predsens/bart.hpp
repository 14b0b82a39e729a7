#pragma once

#include <vector>

#include "predsens/regressor.hpp"
#include "predsens/tree.hpp"

namespace predsens {

// Sum-of-trees regression fit by backfitting MCMC. Each retained posterior
// draw is a full ensemble plus a noise variance; predictions average over
// the retained draws and predictive uncertainty adds the per-draw noise.
class BartModel final : public FittedModel {
 public:
  BartModel(Table x, std::vector<double> y, const RegressorConfig& config);

  RegressorKind kind() const override { return RegressorKind::bart_lite; }
  const std::vector<std::string>& predictor_names() const override { return x_.names; }
  const std::vector<double>& variable_importance() const override { return importance_; }
  TrainingSummary training_summary() const override { return summary_; }

  std::vector<double> point_predict(const Table& rows) const override;
  PredictiveDistribution predict_distribution(
      const Table& rows, int b,
      BootstrapMode mode = BootstrapMode::automatic) const override;

  nlohmann::ordered_json to_json() const override;
  static std::unique_ptr<BartModel> from_json(const nlohmann::ordered_json& blob);

  // Noise-variance values of the retained draws, in sampling order. Used by
  // the convergence diagnostics to test chain stationarity.
  const std::vector<double>& sigma2_chain() const { return sigma2_chain_; }
  std::size_t draw_count() const { return ensembles_.size(); }

  // Calibration constants chosen during fitting, exposed for inspection.
  double leaf_scale() const { return std::sqrt(sigma_mu2_); }
  double noise_prior_scale() const { return lambda_; }

 private:
  BartModel() = default;
  void fit();
  double ensemble_value(std::size_t draw, const Table& rows, std::size_t row) const;

  RegressorConfig config_;
  Table x_;
  std::vector<double> y_;
  double y_mean_ = 0.0;
  double sigma_mu2_ = 1.0;
  double lambda_ = 1.0;
  std::vector<std::vector<Tree>> ensembles_;
  std::vector<double> sigma2_chain_;
  std::vector<double> importance_;
  TrainingSummary summary_;
};

}  // namespace predsens
