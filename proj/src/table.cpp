#include "predsens/table.hpp"

#include "predsens/errors.hpp"

namespace predsens {

Table Table::subset(const std::vector<std::size_t>& rows) const {
  Table out;
  out.names = names;
  out.cols.reserve(cols.size());
  for (const auto& col : cols) {
    std::vector<double> c;
    c.reserve(rows.size());
    for (std::size_t r : rows) c.push_back(col[r]);
    out.cols.push_back(std::move(c));
  }
  return out;
}

Table Table::with_column_front(const std::string& name, std::vector<double> values) const {
  if (!cols.empty() && values.size() != n_rows()) {
    throw ValidationError("with_column_front: row count mismatch");
  }
  Table out;
  out.names.reserve(names.size() + 1);
  out.names.push_back(name);
  out.names.insert(out.names.end(), names.begin(), names.end());
  out.cols.reserve(cols.size() + 1);
  out.cols.push_back(std::move(values));
  out.cols.insert(out.cols.end(), cols.begin(), cols.end());
  return out;
}

Table predictor_table(const Dataset& d, const std::vector<std::size_t>& rows) {
  Table t;
  for (int ci : d.predictor_indexes()) {
    const Column& col = d.columns[static_cast<std::size_t>(ci)];
    std::vector<double> vals;
    vals.reserve(rows.size());
    for (std::size_t r : rows) {
      if (col.is_missing(r)) {
        throw ValidationError("predictor column '" + col.name +
                              "' has missing cells; run imputation first");
      }
      vals.push_back(col.values[r]);
    }
    t.names.push_back(col.name);
    t.cols.push_back(std::move(vals));
  }
  return t;
}

std::vector<double> outcome_values(const Dataset& d, const std::vector<std::size_t>& rows) {
  const Column& y = d.outcome();
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) {
    if (y.is_missing(r)) throw ValidationError("outcome missing on a requested row");
    out.push_back(y.values[r]);
  }
  return out;
}

}  // namespace predsens
