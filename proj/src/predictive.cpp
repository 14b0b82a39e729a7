#include "predsens/predictive.hpp"

#include <cmath>

#include "predsens/errors.hpp"

namespace predsens {

double PredictiveDistribution::unit_mean(std::size_t unit) const {
  double s = 0.0;
  for (std::size_t b = 0; b < n_draws_; ++b) s += at(unit, b);
  return s / static_cast<double>(n_draws_);
}

double PredictiveDistribution::unit_sd(std::size_t unit) const {
  if (n_draws_ < 2) throw ValidationError("unit_sd: need at least 2 draws");
  const double m = unit_mean(unit);
  double s = 0.0;
  for (std::size_t b = 0; b < n_draws_; ++b) {
    const double d = at(unit, b) - m;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(n_draws_ - 1));
}

Interval PredictiveDistribution::unit_interval(std::size_t unit, double level) const {
  return central_interval(unit_draws(unit), level);
}

std::vector<double> PredictiveDistribution::unit_draws(std::size_t unit) const {
  std::vector<double> out(n_draws_);
  for (std::size_t b = 0; b < n_draws_; ++b) out[b] = at(unit, b);
  return out;
}

std::vector<double> PredictiveDistribution::unit_means() const {
  std::vector<double> out(n_units_);
  for (std::size_t u = 0; u < n_units_; ++u) out[u] = unit_mean(u);
  return out;
}

std::vector<double> PredictiveDistribution::draw_values(std::size_t draw) const {
  std::vector<double> out(n_units_);
  for (std::size_t u = 0; u < n_units_; ++u) out[u] = at(u, draw);
  return out;
}

}  // namespace predsens
