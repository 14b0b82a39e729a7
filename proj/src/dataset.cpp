#include "predsens/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "predsens/csv.hpp"
#include "predsens/errors.hpp"

namespace predsens {

namespace {

bool is_missing_token(const std::string& cell) { return cell.empty() || cell == "NA"; }

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::size_t Column::missing_count() const {
  std::size_t n = 0;
  for (auto m : missing) n += m;
  return n;
}

int Dataset::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::size_t> Dataset::study_rows() const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == SplitLabel::study) rows.push_back(i);
  }
  return rows;
}

std::vector<std::size_t> Dataset::target_rows() const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == SplitLabel::target) rows.push_back(i);
  }
  return rows;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.outcome_index = outcome_index;
  out.split.reserve(rows.size());
  for (std::size_t r : rows) out.split.push_back(split.at(r));
  out.columns.reserve(columns.size());
  for (const Column& c : columns) {
    Column nc;
    nc.name = c.name;
    nc.kind = c.kind;
    nc.levels = c.levels;
    nc.values.reserve(rows.size());
    nc.missing.reserve(rows.size());
    for (std::size_t r : rows) {
      nc.values.push_back(c.values[r]);
      nc.missing.push_back(c.missing[r]);
    }
    out.columns.push_back(std::move(nc));
  }
  return out;
}

std::vector<int> Dataset::predictor_indexes() const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (static_cast<int>(i) != outcome_index) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

void Dataset::check_split_invariant() const {
  const Column& y = outcome();
  for (std::size_t i = 0; i < n_rows(); ++i) {
    if (split[i] == SplitLabel::study && y.is_missing(i)) {
      throw ValidationError("row " + std::to_string(i + 1) +
                            " is labeled study but has a missing outcome");
    }
    if (split[i] == SplitLabel::target && !y.is_missing(i)) {
      throw ValidationError("row " + std::to_string(i + 1) +
                            " is labeled target but has an observed outcome");
    }
  }
}

Dataset load_csv(std::istream& in, const LoadOptions& options) {
  if (options.outcome.empty()) throw ValidationError("load_csv: outcome column name required");
  const auto rows = parse_csv(in);
  if (rows.empty()) throw ValidationError("load_csv: empty file");
  const auto& header = rows.front();
  if (header.empty()) throw ValidationError("load_csv: empty header row");
  {
    std::set<std::string> seen;
    for (const auto& name : header) {
      if (name.empty()) throw ValidationError("load_csv: empty column name in header");
      if (!seen.insert(name).second) {
        throw ValidationError("load_csv: duplicate column name '" + name + "'");
      }
    }
  }
  const std::size_t n_cols = header.size();
  const std::size_t n_rows = rows.size() - 1;
  if (n_rows == 0) throw ValidationError("load_csv: no data rows");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != n_cols) {
      throw ValidationError("load_csv: row " + std::to_string(r + 1) + " has " +
                            std::to_string(rows[r].size()) + " cells, expected " +
                            std::to_string(n_cols));
    }
  }

  int split_col = -1;
  if (!options.split_column.empty()) {
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (header[c] == options.split_column) split_col = static_cast<int>(c);
    }
    if (split_col < 0) {
      throw ValidationError("load_csv: split column '" + options.split_column + "' not found");
    }
  }

  Dataset d;
  d.split.assign(n_rows, SplitLabel::study);

  for (std::size_t c = 0; c < n_cols; ++c) {
    if (static_cast<int>(c) == split_col) continue;
    Column col;
    col.name = header[c];
    col.values.assign(n_rows, 0.0);
    col.missing.assign(n_rows, 0);

    std::size_t numeric = 0, textual = 0;
    for (std::size_t r = 0; r < n_rows; ++r) {
      const std::string& cell = rows[r + 1][c];
      if (is_missing_token(cell)) continue;
      if (parse_double(cell)) ++numeric;
      else ++textual;
    }
    if (numeric > 0 && textual > 0) {
      throw ValidationError("load_csv: column '" + col.name +
                            "' mixes numeric and non-numeric cells; use a missing "
                            "sentinel (empty or NA) or quote levels consistently");
    }
    if (textual > 0) {
      col.kind = ColumnKind::categorical;
      std::set<std::string> distinct;
      for (std::size_t r = 0; r < n_rows; ++r) {
        const std::string& cell = rows[r + 1][c];
        if (!is_missing_token(cell)) distinct.insert(cell);
      }
      col.levels.assign(distinct.begin(), distinct.end());
      std::map<std::string, double> code;
      for (std::size_t k = 0; k < col.levels.size(); ++k) code[col.levels[k]] = static_cast<double>(k);
      for (std::size_t r = 0; r < n_rows; ++r) {
        const std::string& cell = rows[r + 1][c];
        if (is_missing_token(cell)) col.missing[r] = 1;
        else col.values[r] = code[cell];
      }
    } else {
      for (std::size_t r = 0; r < n_rows; ++r) {
        const std::string& cell = rows[r + 1][c];
        if (is_missing_token(cell)) {
          col.missing[r] = 1;
        } else {
          col.values[r] = *parse_double(cell);
        }
      }
    }
    if (col.name == options.outcome) {
      if (col.kind == ColumnKind::categorical) {
        throw ValidationError("load_csv: outcome column '" + col.name + "' is not numeric");
      }
      d.outcome_index = static_cast<int>(d.columns.size());
    }
    d.columns.push_back(std::move(col));
  }
  if (d.outcome_index < 0) {
    throw ValidationError("load_csv: outcome column '" + options.outcome + "' not found");
  }

  if (split_col >= 0) {
    for (std::size_t r = 0; r < n_rows; ++r) {
      const std::string tok = lower(rows[r + 1][static_cast<std::size_t>(split_col)]);
      if (tok == "study") d.split[r] = SplitLabel::study;
      else if (tok == "target") d.split[r] = SplitLabel::target;
      else
        throw ValidationError("load_csv: split column cell '" +
                              rows[r + 1][static_cast<std::size_t>(split_col)] +
                              "' at row " + std::to_string(r + 2) +
                              " is neither 'study' nor 'target'");
    }
  } else {
    // No explicit split: rows without an observed outcome form the target set.
    const Column& y = d.outcome();
    for (std::size_t r = 0; r < n_rows; ++r) {
      d.split[r] = y.is_missing(r) ? SplitLabel::target : SplitLabel::study;
    }
  }
  d.check_split_invariant();
  if (d.study_rows().empty()) throw ValidationError("load_csv: no study rows (observed outcomes)");
  return d;
}

Dataset load_csv_file(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return load_csv(in, options);
}

void write_csv(std::ostream& out, const Dataset& d) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header;
  for (const Column& c : d.columns) header.push_back(c.name);
  rows.push_back(std::move(header));
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    std::vector<std::string> row;
    row.reserve(d.columns.size());
    for (const Column& c : d.columns) {
      if (c.is_missing(r)) {
        row.emplace_back();
      } else if (c.kind == ColumnKind::categorical) {
        row.push_back(c.levels.at(static_cast<std::size_t>(c.values[r])));
      } else {
        row.push_back(format_double(c.values[r]));
      }
    }
    rows.push_back(std::move(row));
  }
  write_csv_rows(out, rows);
}

void write_csv_file(const std::string& path, const Dataset& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  write_csv(out, d);
}

ImputeReport impute_simple(Dataset& d) {
  ImputeReport report;
  for (int ci : d.predictor_indexes()) {
    Column& col = d.columns[static_cast<std::size_t>(ci)];
    const std::size_t miss = col.missing_count();
    if (miss == 0) continue;
    if (miss == col.values.size()) {
      throw ValidationError("impute_simple: column '" + col.name + "' is entirely missing");
    }
    double fill;
    if (col.kind == ColumnKind::categorical) {
      std::map<double, std::size_t> counts;
      for (std::size_t r = 0; r < col.values.size(); ++r) {
        if (!col.is_missing(r)) ++counts[col.values[r]];
      }
      fill = counts.begin()->first;
      std::size_t best = counts.begin()->second;
      for (const auto& [code, n] : counts) {
        if (n > best) {
          best = n;
          fill = code;
        }
      }
    } else {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t r = 0; r < col.values.size(); ++r) {
        if (!col.is_missing(r)) {
          sum += col.values[r];
          ++n;
        }
      }
      fill = sum / static_cast<double>(n);
    }
    for (std::size_t r = 0; r < col.values.size(); ++r) {
      if (col.is_missing(r)) {
        col.values[r] = fill;
        col.missing[r] = 0;
      }
    }
    report.column.push_back(col.name);
    report.filled.push_back(miss);
  }
  return report;
}

MomentSummary moments(const Dataset& d, bool include_outcome) {
  std::vector<int> idx;
  if (include_outcome) idx.push_back(d.outcome_index);
  for (int ci : d.predictor_indexes()) idx.push_back(ci);

  const std::size_t n = d.n_rows();
  if (n < 2) throw ValidationError("moments: need at least 2 rows");
  MomentSummary ms;
  const std::size_t p = idx.size();
  ms.correlation = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p),
                                             static_cast<Eigen::Index>(p));
  std::vector<std::vector<double>> centered(p);
  for (std::size_t j = 0; j < p; ++j) {
    const Column& col = d.columns[static_cast<std::size_t>(idx[j])];
    if (col.missing_count() > 0) {
      throw ValidationError("moments: column '" + col.name +
                            "' has missing cells; impute or subset first");
    }
    ms.names.push_back(col.name);
    double m = 0.0;
    for (double v : col.values) m += v;
    m /= static_cast<double>(n);
    double ss = 0.0;
    centered[j].resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      centered[j][r] = col.values[r] - m;
      ss += centered[j][r] * centered[j][r];
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    ms.means.push_back(m);
    ms.sds.push_back(sd);
    ms.degenerate.push_back(sd > 0.0 ? 0 : 1);
  }
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a + 1; b < p; ++b) {
      double r = 0.0;
      if (ms.degenerate[a] == 0 && ms.degenerate[b] == 0) {
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          sxy += centered[a][k] * centered[b][k];
          sxx += centered[a][k] * centered[a][k];
          syy += centered[b][k] * centered[b][k];
        }
        r = sxy / std::sqrt(sxx * syy);
      }
      ms.correlation(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = r;
      ms.correlation(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = r;
    }
  }
  return ms;
}

StandardizeResult standardize(const Dataset& d) {
  StandardizeResult out;
  out.data = d;
  const std::size_t n = d.n_rows();
  if (n < 2) throw ValidationError("standardize: need at least 2 rows");
  for (Column& col : out.data.columns) {
    if (col.missing_count() > 0) {
      throw ValidationError("standardize: column '" + col.name + "' has missing cells");
    }
    double m = 0.0;
    for (double v : col.values) m += v;
    m /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : col.values) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    out.means.push_back(m);
    out.sds.push_back(sd);
    out.degenerate.push_back(sd > 0.0 ? 0 : 1);
    for (double& v : col.values) {
      v = sd > 0.0 ? (v - m) / sd : 0.0;
    }
  }
  return out;
}

}  // namespace predsens
