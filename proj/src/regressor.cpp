#include "predsens/regressor.hpp"

#include <cmath>

#include "predsens/bart.hpp"
#include "predsens/errors.hpp"
#include "predsens/forest.hpp"
#include "predsens/stats.hpp"

namespace predsens {

double depth_split_probability(int depth, double beta, double eta) {
  return beta * std::pow(1.0 + static_cast<double>(depth), -eta);
}

void FittedModel::check_schema(const Table& rows) const {
  if (rows.names != predictor_names()) {
    throw ValidationError(
        "prediction input columns do not match the model's training schema");
  }
  for (const auto& col : rows.cols) {
    for (double v : col) {
      if (!std::isfinite(v)) {
        throw ValidationError("prediction input contains non-finite values");
      }
    }
  }
}

std::unique_ptr<FittedModel> fit_regressor(Table x, std::vector<double> y,
                                           const RegressorConfig& config) {
  if (x.n_cols() == 0) throw ValidationError("fit_regressor: no predictors");
  if (x.n_rows() != y.size()) {
    throw ValidationError("fit_regressor: predictor and outcome row counts differ");
  }
  if (x.n_rows() < 10) {
    throw ValidationError("fit_regressor: need at least 10 training rows");
  }
  if (!(variance(y) > 0.0)) {
    throw ValidationError("fit_regressor: outcome is constant");
  }
  if (config.trees < 0) throw ValidationError("fit_regressor: negative tree count");
  if (config.kind == RegressorKind::bart_lite) {
    if (config.bart.burn_in < 0 || config.bart.draws < 1) {
      throw ValidationError("fit_regressor: bad sampler schedule");
    }
    return std::make_unique<BartModel>(std::move(x), std::move(y), config);
  }
  if (config.forest.min_node < 1) {
    throw ValidationError("fit_regressor: min_node must be >= 1");
  }
  return std::make_unique<ForestModel>(std::move(x), std::move(y), config);
}

std::unique_ptr<FittedModel> model_from_json(const nlohmann::ordered_json& blob) {
  if (!blob.is_object() || blob.value("format", "") != "predsens_model") {
    throw ValidationError("model file is not a predsens model payload");
  }
  const std::string kind = blob.value("kind", "");
  if (kind == "random_forest") return ForestModel::from_json(blob);
  if (kind == "bart_lite") return BartModel::from_json(blob);
  throw ValidationError("unknown model kind '" + kind + "'");
}

}  // namespace predsens
