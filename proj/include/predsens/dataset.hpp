#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace predsens {

enum class SplitLabel : std::uint8_t { study, target };

enum class ColumnKind : std::uint8_t { continuous, categorical };

// One column of a rectangular dataset. Categorical columns hold integer codes
// in `values`; `levels` maps code -> original label (codes are assigned by
// lexicographic label order so they do not depend on row order).
struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::vector<double> values;
  std::vector<std::uint8_t> missing;
  std::vector<std::string> levels;

  bool is_missing(std::size_t row) const { return missing[row] != 0; }
  std::size_t missing_count() const;
};

struct Dataset {
  std::vector<Column> columns;
  int outcome_index = -1;
  std::vector<SplitLabel> split;

  std::size_t n_rows() const { return split.size(); }
  std::size_t n_predictors() const { return columns.empty() ? 0 : columns.size() - 1; }
  const Column& outcome() const { return columns.at(outcome_index); }
  Column& outcome() { return columns.at(outcome_index); }
  int column_index(const std::string& name) const;

  std::vector<std::size_t> study_rows() const;
  std::vector<std::size_t> target_rows() const;
  Dataset subset(const std::vector<std::size_t>& rows) const;
  // Predictor column indexes in stored order (everything except the outcome).
  std::vector<int> predictor_indexes() const;

  // Throws ValidationError if the study/target labeling breaks the rule
  // "study rows have an observed outcome, target rows do not".
  void check_split_invariant() const;
};

struct LoadOptions {
  std::string outcome;       // required column name
  std::string split_column;  // optional; empty means derive from outcome missingness
};

// Header row is required. Missing cells are "" or "NA". Columns where every
// non-missing cell parses as a number are continuous; columns where none do
// are categorical; a mix of the two is treated as a corrupt file.
Dataset load_csv(std::istream& in, const LoadOptions& options);
Dataset load_csv_file(const std::string& path, const LoadOptions& options);

// Writes numeric cells with shortest round-trip formatting, categorical cells
// as their labels, missing cells as empty fields.
void write_csv(std::ostream& out, const Dataset& d);
void write_csv_file(const std::string& path, const Dataset& d);

struct ImputeReport {
  std::vector<std::string> column;
  std::vector<std::size_t> filled;
};

// Fills missing predictor cells in place: column mean for continuous columns,
// modal code for categorical ones (ties broken toward the smaller code).
// The outcome column is never imputed; its missingness defines the split.
ImputeReport impute_simple(Dataset& d);

struct MomentSummary {
  std::vector<std::string> names;
  std::vector<double> means;
  std::vector<double> sds;  // N-1 denominator
  Eigen::MatrixXd correlation;
  std::vector<std::uint8_t> degenerate;  // zero-variance flags

  std::size_t size() const { return names.size(); }
};

// Moments over all rows of `d`, outcome first when included. Requires
// complete data in the included columns. Zero-variance columns contribute 0
// off-diagonal correlation and get flagged instead of producing NaNs.
MomentSummary moments(const Dataset& d, bool include_outcome);

struct StandardizeResult {
  Dataset data;
  std::vector<double> means;
  std::vector<double> sds;  // 0 recorded for degenerate columns
  std::vector<std::uint8_t> degenerate;
};

// Centers and scales every column (outcome included). Degenerate columns are
// centered only. Works column by column; no N x N centering matrix is ever
// formed, so this is O(N P).
StandardizeResult standardize(const Dataset& d);

}  // namespace predsens
