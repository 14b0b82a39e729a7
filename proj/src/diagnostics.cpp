#include "predsens/diagnostics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

#include "predsens/errors.hpp"
#include "predsens/rng.hpp"
#include "predsens/stats.hpp"
#include "predsens/table.hpp"

namespace predsens {
namespace {

constexpr std::uint64_t kFoldStream = 401;
constexpr std::uint64_t kFitStream = 402;
constexpr double kMadScale = 1.4826;  // makes MAD consistent for the normal sd

std::vector<std::size_t> round_robin_folds(std::size_t n, int k, Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
  }
  std::vector<std::size_t> fold(n);
  for (std::size_t i = 0; i < n; ++i) {
    fold[perm[i]] = i % static_cast<std::size_t>(k);
  }
  return fold;
}

struct FoldMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  bool r2_defined = false;
};

FoldMetrics fold_metrics(const std::vector<double>& pred,
                         const std::vector<double>& truth) {
  FoldMetrics m;
  double sse = 0.0;
  double sae = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    sse += d * d;
    sae += std::abs(d);
  }
  const double n = static_cast<double>(pred.size());
  m.rmse = std::sqrt(sse / n);
  m.mae = sae / n;
  const double sst = variance(truth) * (n - 1.0);
  if (sst > 0.0) {
    m.r2 = 1.0 - sse / sst;
    m.r2_defined = true;
  }
  return m;
}

void aggregate_cv(CvResult& result) {
  result.mean_rmse = mean(result.fold_rmse);
  result.mean_mae = mean(result.fold_mae);
  double acc = 0.0;
  std::size_t defined = 0;
  for (std::size_t f = 0; f < result.fold_r2.size(); ++f) {
    if (result.r2_defined[f]) {
      acc += result.fold_r2[f];
      ++defined;
    }
  }
  result.mean_r2 = defined > 0 ? acc / static_cast<double>(defined) : 0.0;
  if (defined < result.fold_r2.size()) {
    result.warnings.push_back("r2 undefined in " +
                              std::to_string(result.fold_r2.size() - defined) +
                              " fold(s) with constant outcome");
  }
}

}  // namespace

OutlierReport detect_outliers(const std::vector<double>& unit_means,
                              const OutlierRule& rule) {
  if (!(rule.multiplier > 0.0)) {
    throw ValidationError("detect_outliers: multiplier must be positive");
  }
  if (unit_means.size() < 3) {
    throw ValidationError("detect_outliers: need at least 3 units");
  }
  OutlierReport report;
  if (rule.kind == OutlierKind::sd_from_mean) {
    report.center = mean(unit_means);
    report.spread = stddev(unit_means);
  } else {
    report.center = median(unit_means);
    report.spread = kMadScale * mad(unit_means);
  }
  const std::size_t n = unit_means.size();
  report.flagged.assign(n, 0);
  report.low.assign(n, 0);
  // Relative tolerance: the mean of n identical doubles need not equal the
  // value exactly, which leaves a ~1e-16 residual spread on constant input.
  const double spread_floor = 1e-12 * std::max(1.0, std::abs(report.center));
  if (!(report.spread > spread_floor)) {
    report.warnings.push_back(
        "predictions have zero dispersion; no units flagged");
    return report;
  }
  const double lo = report.center - rule.multiplier * report.spread;
  const double hi = report.center + rule.multiplier * report.spread;
  for (std::size_t i = 0; i < n; ++i) {
    const bool below = unit_means[i] < lo;
    const bool above = unit_means[i] > hi;
    report.low[i] = below ? 1 : 0;
    switch (rule.tail) {
      case OutlierTail::lower: report.flagged[i] = below ? 1 : 0; break;
      case OutlierTail::upper: report.flagged[i] = above ? 1 : 0; break;
      case OutlierTail::both: report.flagged[i] = (below || above) ? 1 : 0; break;
    }
  }
  return report;
}

OutlierReport detect_outliers(const PredictiveDistribution& p, const OutlierRule& rule) {
  return detect_outliers(p.unit_means(), rule);
}

namespace {

struct TreeJob {
  int node;
  int depth;
  std::vector<std::size_t> rows;
};

}  // namespace

FitTheFitTree fit_the_fit(const Dataset& d, const std::vector<std::uint8_t>& indicator,
                          int max_depth, std::size_t min_leaf) {
  if (indicator.size() != d.n_rows()) {
    throw ValidationError("fit_the_fit: indicator length does not match row count");
  }
  if (d.n_rows() == 0) throw ValidationError("fit_the_fit: empty dataset");
  if (max_depth < 0 || min_leaf < 1) {
    throw ValidationError("fit_the_fit: bad depth or leaf bounds");
  }
  std::vector<std::size_t> all(d.n_rows());
  std::iota(all.begin(), all.end(), 0);
  const Table x = predictor_table(d, all);

  FitTheFitTree tree;
  tree.predictor_names = x.names;
  tree.max_depth = max_depth;
  tree.min_leaf = min_leaf;
  tree.nodes.push_back(FitTheFitNode{});

  std::vector<TreeJob> stack;
  stack.push_back({0, 0, std::move(all)});
  while (!stack.empty()) {
    TreeJob job = std::move(stack.back());
    stack.pop_back();

    const std::size_t n = job.rows.size();
    std::size_t n_low = 0;
    for (std::size_t r : job.rows) n_low += indicator[r] ? 1 : 0;
    {
      FitTheFitNode& node = tree.nodes[static_cast<std::size_t>(job.node)];
      node.count = n;
      node.low_share = static_cast<double>(n_low) / static_cast<double>(n);
    }
    if (job.depth >= max_depth || n < 2 * min_leaf || n_low == 0 || n_low == n) {
      continue;
    }

    const double share = static_cast<double>(n_low) / static_cast<double>(n);
    const double gini_parent = 2.0 * share * (1.0 - share);
    int best_var = -1;
    double best_threshold = 0.0;
    double best_decrease = 1e-4;  // gate: anything at or below stays a leaf

    std::vector<std::pair<double, std::uint8_t>> pts(n);
    for (std::size_t j = 0; j < x.n_cols(); ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        pts[i] = {x.cols[j][job.rows[i]], indicator[job.rows[i]]};
      }
      std::sort(pts.begin(), pts.end());
      double low_l = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        low_l += pts[i].second;
        const double n_l = static_cast<double>(i + 1);
        const double n_r = static_cast<double>(n) - n_l;
        if (n_l < static_cast<double>(min_leaf)) continue;
        if (n_r < static_cast<double>(min_leaf)) break;
        if (!(pts[i].first < pts[i + 1].first)) continue;
        const double low_r = static_cast<double>(n_low) - low_l;
        const double p_l = low_l / n_l;
        const double p_r = low_r / n_r;
        const double decrease =
            gini_parent -
            (n_l * 2.0 * p_l * (1.0 - p_l) + n_r * 2.0 * p_r * (1.0 - p_r)) /
                static_cast<double>(n);
        if (decrease <= best_decrease) continue;
        // Significance gate on the split's low-share difference.
        if (std::abs(two_proportion_z(low_l, n_l, low_r, n_r)) < 1.96) continue;
        best_decrease = decrease;
        best_var = static_cast<int>(j);
        best_threshold = pts[i].first * 0.5 + pts[i + 1].first * 0.5;
      }
    }
    if (best_var < 0) continue;

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (std::size_t r : job.rows) {
      (x.cols[static_cast<std::size_t>(best_var)][r] <= best_threshold ? left_rows
                                                                       : right_rows)
          .push_back(r);
    }
    const int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(FitTheFitNode{});
    const int right_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(FitTheFitNode{});
    FitTheFitNode& node = tree.nodes[static_cast<std::size_t>(job.node)];
    node.var = best_var;
    node.threshold = best_threshold;
    node.left = left_id;
    node.right = right_id;
    stack.push_back({right_id, job.depth + 1, std::move(right_rows)});
    stack.push_back({left_id, job.depth + 1, std::move(left_rows)});
  }
  return tree;
}

namespace {

void render_text(const FitTheFitTree& tree, int node, int indent,
                 std::ostringstream& out) {
  const FitTheFitNode& nd = tree.nodes[static_cast<std::size_t>(node)];
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  if (nd.var < 0) {
    out << pad << "leaf: low " << (nd.low_share * 100.0) << "% (n=" << nd.count
        << ")\n";
    return;
  }
  out << pad << tree.predictor_names[static_cast<std::size_t>(nd.var)]
      << " <= " << nd.threshold << " (n=" << nd.count << ")\n";
  render_text(tree, nd.left, indent + 1, out);
  render_text(tree, nd.right, indent + 1, out);
}

}  // namespace

std::string FitTheFitTree::to_text() const {
  std::ostringstream out;
  render_text(*this, 0, 0, out);
  return out.str();
}

std::string FitTheFitTree::to_dot() const {
  std::ostringstream out;
  out << "digraph fit_the_fit {\n  node [shape=box];\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const FitTheFitNode& nd = nodes[i];
    if (nd.var >= 0) {
      out << "  n" << i << " [label=\""
          << predictor_names[static_cast<std::size_t>(nd.var)] << " <= "
          << nd.threshold << "\\nn=" << nd.count << "\"];\n";
      out << "  n" << i << " -> n" << nd.left << " [label=\"yes\"];\n";
      out << "  n" << i << " -> n" << nd.right << " [label=\"no\"];\n";
    } else {
      out << "  n" << i << " [label=\"low " << (nd.low_share * 100.0)
          << "%\\nn=" << nd.count << "\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

OverlapReport overlap_score(const Dataset& d, double ridge) {
  const std::vector<std::size_t> study = d.study_rows();
  const std::vector<std::size_t> target = d.target_rows();
  if (study.empty() || target.empty()) {
    throw ValidationError("overlap_score: both splits must be nonempty");
  }
  if (!(ridge >= 0.0)) throw ValidationError("overlap_score: negative ridge");

  std::vector<std::size_t> all(d.n_rows());
  std::iota(all.begin(), all.end(), 0);
  const Table x = predictor_table(d, all);
  const std::size_t n = x.n_rows();
  const std::size_t p = x.n_cols();

  OverlapReport report;

  // Standardized design with intercept; degenerate predictors drop out of
  // the fit (their coefficient is reported as zero).
  std::vector<double> mu(p, 0.0);
  std::vector<double> sd(p, 0.0);
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < p; ++j) {
    mu[j] = mean(x.cols[j]);
    sd[j] = stddev(x.cols[j]);
    if (sd[j] > 0.0) {
      active.push_back(j);
    } else {
      report.warnings.push_back("overlap_score: predictor '" + x.names[j] +
                                "' is constant and was ignored");
    }
  }
  const std::size_t q = active.size() + 1;
  Eigen::MatrixXd design(n, q);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    design(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const std::size_t j = active[a];
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a + 1)) =
          (x.cols[j][i] - mu[j]) / sd[j];
    }
    y(static_cast<Eigen::Index>(i)) = d.split[i] == SplitLabel::study ? 1.0 : 0.0;
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
  Eigen::VectorXd eta = design * beta;
  for (int iter = 0; iter < 100; ++iter) {
    report.iterations = iter + 1;
    Eigen::VectorXd prob(n);
    Eigen::VectorXd w(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double e = 1.0 / (1.0 + std::exp(-eta(static_cast<Eigen::Index>(i))));
      const double pc = std::min(std::max(e, 1e-12), 1.0 - 1e-12);
      prob(static_cast<Eigen::Index>(i)) = pc;
      w(static_cast<Eigen::Index>(i)) = std::max(pc * (1.0 - pc), 1e-10);
    }
    Eigen::VectorXd penalty = ridge * beta;
    penalty(0) = 0.0;  // the intercept is not shrunk
    const Eigen::VectorXd grad = design.transpose() * (y - prob) - penalty;
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-8) {
      report.converged = true;
      break;
    }
    // One weighted least-squares step on the working response.
    Eigen::VectorXd z = eta + (y - prob).cwiseQuotient(w);
    Eigen::MatrixXd h = design.transpose() * w.asDiagonal() * design;
    for (std::size_t j = 1; j < q; ++j) {
      h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += ridge;
    }
    beta = h.ldlt().solve(design.transpose() * (w.asDiagonal() * z));
    eta = design * beta;
  }
  if (!report.converged) {
    report.warnings.push_back("overlap_score: IRLS hit the iteration cap");
  }

  report.score.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    report.score[i] = 1.0 / (1.0 + std::exp(-eta(static_cast<Eigen::Index>(i))));
  }

  // Coefficients back on the raw predictor scale (fit used standardized
  // columns with an L2 penalty; the report notes the penalty).
  report.coefficients.assign(p + 1, 0.0);
  report.coefficients[0] = beta(0);
  for (std::size_t a = 0; a < active.size(); ++a) {
    const std::size_t j = active[a];
    report.coefficients[j + 1] = beta(static_cast<Eigen::Index>(a + 1)) / sd[j];
    report.coefficients[0] -=
        beta(static_cast<Eigen::Index>(a + 1)) * mu[j] / sd[j];
  }

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = d.split[i] == SplitLabel::study ? 1 : 0;
  }
  report.auc = auc(report.score, labels);

  double study_lo = 1.0;
  double study_hi = 0.0;
  double target_lo = 1.0;
  double target_hi = 0.0;
  for (std::size_t i : study) {
    study_lo = std::min(study_lo, report.score[i]);
    study_hi = std::max(study_hi, report.score[i]);
  }
  for (std::size_t i : target) {
    target_lo = std::min(target_lo, report.score[i]);
    target_hi = std::max(target_hi, report.score[i]);
  }
  report.trimmed.assign(n, 0);
  std::size_t trimmed_targets = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d.split[i] == SplitLabel::target) {
      report.trimmed[i] = (report.score[i] < study_lo || report.score[i] > study_hi) ? 1 : 0;
      trimmed_targets += report.trimmed[i];
    } else {
      report.trimmed[i] = (report.score[i] < target_lo || report.score[i] > target_hi) ? 1 : 0;
    }
  }
  if (report.auc >= 1.0 - 1e-12) {
    report.warnings.push_back(
        "overlap_score: splits are perfectly separable; every target unit "
        "lies outside the study score range");
  } else if (trimmed_targets == target.size()) {
    report.warnings.push_back("overlap_score: all target units trimmed");
  }
  return report;
}

CvResult kfold_cv(const Dataset& d, const RegressorConfig& cfg, int k,
                  std::uint64_t seed) {
  if (k < 2) throw ValidationError("kfold_cv: k must be at least 2");
  const std::vector<std::size_t> study = d.study_rows();
  if (study.size() < 2 * static_cast<std::size_t>(k)) {
    throw ValidationError("kfold_cv: need at least 2k study rows");
  }
  const Table x = predictor_table(d, study);
  const std::vector<double> y = outcome_values(d, study);

  Rng rng(derive_seed(seed, {kFoldStream}));
  const std::vector<std::size_t> fold = round_robin_folds(study.size(), k, rng);

  CvResult result;
  result.k = k;
  result.seed = seed;
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> train_pos;
    std::vector<std::size_t> test_pos;
    for (std::size_t i = 0; i < study.size(); ++i) {
      (fold[i] == static_cast<std::size_t>(f) ? test_pos : train_pos).push_back(i);
    }
    std::vector<double> y_train(train_pos.size());
    std::vector<double> y_test(test_pos.size());
    for (std::size_t i = 0; i < train_pos.size(); ++i) y_train[i] = y[train_pos[i]];
    for (std::size_t i = 0; i < test_pos.size(); ++i) y_test[i] = y[test_pos[i]];

    RegressorConfig fold_cfg = cfg;
    fold_cfg.seed = derive_seed(seed, {kFitStream, static_cast<std::uint64_t>(f)});
    const auto model = fit_regressor(x.subset(train_pos), y_train, fold_cfg);
    const FoldMetrics m = fold_metrics(model->point_predict(x.subset(test_pos)), y_test);
    result.fold_rmse.push_back(m.rmse);
    result.fold_mae.push_back(m.mae);
    result.fold_r2.push_back(m.r2);
    result.r2_defined.push_back(m.r2_defined ? 1 : 0);
  }
  aggregate_cv(result);
  return result;
}

CvResult cross_population_cv(const Dataset& d, const std::string& proxy_outcome,
                             const RegressorConfig& cfg, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("cross_population_cv: k must be at least 2");
  const int proxy_idx = d.column_index(proxy_outcome);
  if (proxy_idx < 0) {
    throw ValidationError("cross_population_cv: no column named '" + proxy_outcome + "'");
  }
  if (proxy_idx == d.outcome_index) {
    throw ValidationError(
        "cross_population_cv: the proxy outcome must differ from the outcome");
  }
  const Column& proxy = d.columns[static_cast<std::size_t>(proxy_idx)];
  if (proxy.kind != ColumnKind::continuous) {
    throw ValidationError("cross_population_cv: proxy outcome must be numeric");
  }

  const std::vector<std::size_t> study = d.study_rows();
  const std::vector<std::size_t> target = d.target_rows();
  if (study.size() < 2 * static_cast<std::size_t>(k) ||
      target.size() < static_cast<std::size_t>(k)) {
    throw ValidationError("cross_population_cv: too few rows for k folds");
  }
  for (std::size_t i : study) {
    if (proxy.is_missing(i)) {
      throw ValidationError("cross_population_cv: proxy outcome missing on study rows");
    }
  }
  for (std::size_t i : target) {
    if (proxy.is_missing(i)) {
      throw ValidationError("cross_population_cv: proxy outcome missing on target rows");
    }
  }

  // Predictors exclude both the original outcome and the proxy.
  Table x_all;
  for (std::size_t c = 0; c < d.columns.size(); ++c) {
    if (static_cast<int>(c) == d.outcome_index || static_cast<int>(c) == proxy_idx) {
      continue;
    }
    const Column& col = d.columns[c];
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
      if (col.is_missing(i)) {
        throw ValidationError("cross_population_cv: predictor '" + col.name +
                              "' has missing values; impute first");
      }
    }
    x_all.names.push_back(col.name);
    x_all.cols.push_back(col.values);
  }
  if (x_all.n_cols() == 0) {
    throw ValidationError("cross_population_cv: no predictors left");
  }

  Rng rng(derive_seed(seed, {kFoldStream}));
  const std::vector<std::size_t> study_fold = round_robin_folds(study.size(), k, rng);
  const std::vector<std::size_t> target_fold = round_robin_folds(target.size(), k, rng);

  CvResult result;
  result.k = k;
  result.seed = seed;
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (std::size_t i = 0; i < study.size(); ++i) {
      if (study_fold[i] != static_cast<std::size_t>(f)) train_rows.push_back(study[i]);
    }
    for (std::size_t i = 0; i < target.size(); ++i) {
      if (target_fold[i] == static_cast<std::size_t>(f)) test_rows.push_back(target[i]);
    }
    std::vector<double> y_train(train_rows.size());
    std::vector<double> y_test(test_rows.size());
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      y_train[i] = proxy.values[train_rows[i]];
    }
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      y_test[i] = proxy.values[test_rows[i]];
    }

    RegressorConfig fold_cfg = cfg;
    fold_cfg.seed = derive_seed(seed, {kFitStream, static_cast<std::uint64_t>(f)});
    const auto model = fit_regressor(x_all.subset(train_rows), y_train, fold_cfg);
    const FoldMetrics m =
        fold_metrics(model->point_predict(x_all.subset(test_rows)), y_test);
    result.fold_rmse.push_back(m.rmse);
    result.fold_mae.push_back(m.mae);
    result.fold_r2.push_back(m.r2);
    result.r2_defined.push_back(m.r2_defined ? 1 : 0);
  }
  aggregate_cv(result);
  return result;
}

}  // namespace predsens
