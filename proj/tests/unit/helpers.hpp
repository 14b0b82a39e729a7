#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "predsens/dataset.hpp"
#include "predsens/rng.hpp"
#include "predsens/stats.hpp"
#include "predsens/synth.hpp"

namespace testutil {

// Complete all-study dataset from raw columns; column 0 is the outcome.
inline predsens::Dataset make_dataset(const std::vector<std::string>& names,
                                      const std::vector<std::vector<double>>& cols) {
  predsens::Dataset d;
  d.outcome_index = 0;
  d.split.assign(cols.at(0).size(), predsens::SplitLabel::study);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    predsens::Column col;
    col.name = names.at(c);
    col.values = cols[c];
    col.missing.assign(cols[c].size(), 0);
    d.columns.push_back(std::move(col));
  }
  return d;
}

// y = 0.8 x1 - 0.5 x2 + sigma * eps with iid standard normal predictors.
inline predsens::Dataset linear_dgp(std::size_t n, std::size_t p, double sigma,
                                    std::uint64_t seed) {
  predsens::Rng rng(seed);
  std::vector<std::vector<double>> cols(p + 1, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j <= p; ++j) cols[j][i] = rng.normal();
    double y = 0.8 * cols[1][i];
    if (p >= 2) y -= 0.5 * cols[2][i];
    cols[0][i] = y + sigma * rng.normal();
  }
  std::vector<std::string> names{"y"};
  for (std::size_t j = 1; j <= p; ++j) names.push_back("x" + std::to_string(j));
  return make_dataset(names, cols);
}

// Stack with centered and scaled columns, synthetic slot at position 1.
inline predsens::StackedMatrix make_stack(const std::vector<std::vector<double>>& cols) {
  predsens::StackedMatrix s;
  const std::size_t n = cols.at(0).size();
  s.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const double m = predsens::mean(cols[c]);
    const double sd = predsens::stddev(cols[c]);
    for (std::size_t i = 0; i < n; ++i) {
      s.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = (cols[c][i] - m) / sd;
    }
    s.names.push_back("c" + std::to_string(c));
  }
  return s;
}

}  // namespace testutil
