#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "predsens/dataset.hpp"

namespace predsens {

// Column-major numeric matrix handed to the regressors. Categorical columns
// arrive as their integer codes.
struct Table {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;

  std::size_t n_rows() const { return cols.empty() ? 0 : cols.front().size(); }
  std::size_t n_cols() const { return cols.size(); }
  double at(std::size_t row, std::size_t col) const { return cols[col][row]; }

  Table subset(const std::vector<std::size_t>& rows) const;
  // Prepends a column, shifting the existing ones right.
  Table with_column_front(const std::string& name, std::vector<double> values) const;
};

// Predictors of `d` restricted to `rows`; throws on missing cells.
Table predictor_table(const Dataset& d, const std::vector<std::size_t>& rows);
std::vector<double> outcome_values(const Dataset& d, const std::vector<std::size_t>& rows);

}  // namespace predsens
