#pragma once

#include <cstddef>
#include <vector>

#include "predsens/stats.hpp"

namespace predsens {

// Per-unit draws from a model's predictive distribution, stored densely
// (unit-major). Unit means are defined as the row average of the draws.
class PredictiveDistribution {
 public:
  PredictiveDistribution(std::size_t n_units, std::size_t n_draws)
      : n_units_(n_units), n_draws_(n_draws), values_(n_units * n_draws, 0.0) {}

  std::size_t n_units() const { return n_units_; }
  std::size_t n_draws() const { return n_draws_; }

  double& at(std::size_t unit, std::size_t draw) { return values_[unit * n_draws_ + draw]; }
  double at(std::size_t unit, std::size_t draw) const { return values_[unit * n_draws_ + draw]; }

  double unit_mean(std::size_t unit) const;
  double unit_sd(std::size_t unit) const;
  Interval unit_interval(std::size_t unit, double level) const;
  std::vector<double> unit_draws(std::size_t unit) const;
  std::vector<double> unit_means() const;
  // Predictions of one draw across all units.
  std::vector<double> draw_values(std::size_t draw) const;

 private:
  std::size_t n_units_;
  std::size_t n_draws_;
  std::vector<double> values_;
};

}  // namespace predsens
