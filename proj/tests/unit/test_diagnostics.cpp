#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "predsens/diagnostics.hpp"
#include "predsens/errors.hpp"
#include "predsens/rng.hpp"
#include "predsens/stats.hpp"
#include "predsens/table.hpp"

using namespace predsens;

TEST_CASE("outlier rules reproduce the normal lower-tail share") {
  Rng rng(7);
  std::vector<double> means(100000);
  for (double& v : means) v = rng.normal();

  OutlierRule sd_rule;  // sd_from_mean, K=2, lower
  const OutlierReport sd_report = detect_outliers(means, sd_rule);
  double share = 0.0;
  for (auto f : sd_report.flagged) share += f;
  share /= static_cast<double>(means.size());
  // P(Z < -2) = 0.02275, estimated center/spread add a little wobble.
  CHECK(share == doctest::Approx(0.02275).epsilon(0.13));
  CHECK(std::abs(share - 0.02275) <= 0.003);

  OutlierRule mad_rule;
  mad_rule.kind = OutlierKind::mad_from_median;
  const OutlierReport mad_report = detect_outliers(means, mad_rule);
  double mad_share = 0.0;
  for (auto f : mad_report.flagged) mad_share += f;
  mad_share /= static_cast<double>(means.size());
  CHECK(std::abs(mad_share - 0.02275) <= 0.004);

  // The two rules agree on the vast majority of units for normal data.
  CHECK(sd_report.center == doctest::Approx(mad_report.center).epsilon(0.05));
}

TEST_CASE("outlier flags are invariant under affine maps") {
  Rng rng(13);
  std::vector<double> means(500);
  for (double& v : means) v = rng.normal(3.0, 2.0);
  std::vector<double> shifted(means.size());
  for (std::size_t i = 0; i < means.size(); ++i) shifted[i] = 5.0 * means[i] - 11.0;

  for (OutlierKind kind : {OutlierKind::sd_from_mean, OutlierKind::mad_from_median}) {
    for (OutlierTail tail : {OutlierTail::lower, OutlierTail::upper, OutlierTail::both}) {
      OutlierRule rule;
      rule.kind = kind;
      rule.tail = tail;
      const OutlierReport a = detect_outliers(means, rule);
      const OutlierReport b = detect_outliers(shifted, rule);
      CHECK(a.flagged == b.flagged);
      CHECK(a.low == b.low);
    }
  }
}

TEST_CASE("outlier tails and the low indicator") {
  // One clear low point and one clear high point in a tight cluster.
  std::vector<double> means{0.0, 0.1, -0.1, 0.05, -0.05, 0.02, -0.02, 0.08,
                            -0.08, 0.03, -10.0, 10.0};
  OutlierRule rule;
  rule.tail = OutlierTail::lower;
  const OutlierReport lower = detect_outliers(means, rule);
  CHECK(lower.flagged[10] == 1);
  CHECK(lower.flagged[11] == 0);
  CHECK(lower.low[10] == 1);

  rule.tail = OutlierTail::upper;
  const OutlierReport upper = detect_outliers(means, rule);
  CHECK(upper.flagged[10] == 0);
  CHECK(upper.flagged[11] == 1);
  // The low indicator keeps its meaning regardless of the tail setting.
  CHECK(upper.low[10] == 1);
  CHECK(upper.low[11] == 0);

  rule.tail = OutlierTail::both;
  const OutlierReport both = detect_outliers(means, rule);
  CHECK(both.flagged[10] == 1);
  CHECK(both.flagged[11] == 1);

  std::size_t n_flagged = 0;
  for (auto f : both.flagged) n_flagged += f;
  CHECK(n_flagged == 2);
}

TEST_CASE("outlier edge cases") {
  const std::vector<double> constant(10, 4.2);
  const OutlierReport report = detect_outliers(constant, OutlierRule{});
  for (auto f : report.flagged) CHECK(f == 0);
  REQUIRE(report.warnings.size() == 1);
  CHECK(report.warnings[0].find("zero dispersion") != std::string::npos);

  CHECK_THROWS_AS(detect_outliers(std::vector<double>{1.0, 2.0}, OutlierRule{}),
                  ValidationError);
  OutlierRule bad;
  bad.multiplier = 0.0;
  CHECK_THROWS_AS(detect_outliers(constant, bad), ValidationError);

  // Distribution overload agrees with the plain-vector one.
  PredictiveDistribution dist(12, 3);
  std::vector<double> means{0.0, 0.1, -0.1, 0.05, -0.05, 0.02, -0.02, 0.08,
                            -0.08, 0.03, -10.0, 10.0};
  for (std::size_t u = 0; u < 12; ++u) {
    for (std::size_t k = 0; k < 3; ++k) dist.at(u, k) = means[u];
  }
  const OutlierReport via_dist = detect_outliers(dist, OutlierRule{});
  CHECK(via_dist.flagged == detect_outliers(means, OutlierRule{}).flagged);
}

TEST_CASE("fit-the-fit recovers a planted threshold") {
  Rng rng(17);
  const std::size_t n = 600;
  std::vector<double> score(n);
  std::vector<double> other(n);
  std::vector<std::uint8_t> indicator(n);
  for (std::size_t i = 0; i < n; ++i) {
    score[i] = 300.0 + 200.0 * rng.uniform();
    other[i] = rng.normal();
    indicator[i] = score[i] <= 400.0 ? 1 : 0;
  }
  Dataset d = testutil::make_dataset({"y", "score", "other"},
                                     {std::vector<double>(n, 0.0), score, other});
  const FitTheFitTree tree = fit_the_fit(d, indicator, 3, 30);

  REQUIRE(tree.nodes.size() == 3);  // one split, two leaves
  CHECK(tree.nodes[0].var == 0);    // "score" is the first predictor
  CHECK(std::abs(tree.nodes[0].threshold - 400.0) <= 2.0);
  const FitTheFitNode& left = tree.nodes[static_cast<std::size_t>(tree.nodes[0].left)];
  const FitTheFitNode& right = tree.nodes[static_cast<std::size_t>(tree.nodes[0].right)];
  CHECK(left.low_share == 1.0);
  CHECK(right.low_share == 0.0);
  CHECK(left.count + right.count == n);

  const std::string text = tree.to_text();
  CHECK(text.find("score <= ") != std::string::npos);
  const std::string dot = tree.to_dot();
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("low 100") != std::string::npos);
}

TEST_CASE("fit-the-fit leaf shares aggregate to the indicator mean") {
  Dataset d = testutil::linear_dgp(400, 3, 0.5, 23);
  Rng rng(29);
  std::vector<std::uint8_t> indicator(400);
  double total = 0.0;
  for (std::size_t i = 0; i < 400; ++i) {
    // Correlated with x1 so the tree has something to find.
    indicator[i] = (d.columns[1].values[i] + 0.5 * rng.normal()) < -0.5 ? 1 : 0;
    total += indicator[i];
  }
  const FitTheFitTree tree = fit_the_fit(d, indicator, 4, 20);
  double weighted = 0.0;
  std::size_t leaf_total = 0;
  for (const FitTheFitNode& node : tree.nodes) {
    if (node.var < 0) {
      weighted += node.low_share * static_cast<double>(node.count);
      leaf_total += node.count;
    }
  }
  CHECK(leaf_total == 400);
  CHECK(weighted == doctest::Approx(total).epsilon(1e-12));
  for (const FitTheFitNode& node : tree.nodes) {
    if (node.var < 0) CHECK(node.count >= 20);
  }
}

TEST_CASE("fit-the-fit degenerate inputs") {
  Dataset d = testutil::linear_dgp(100, 2, 0.5, 31);
  const std::vector<std::uint8_t> all_zero(100, 0);
  const FitTheFitTree tree = fit_the_fit(d, all_zero, 3, 10);
  REQUIRE(tree.nodes.size() == 1);
  CHECK(tree.nodes[0].var == -1);
  CHECK(tree.nodes[0].low_share == 0.0);

  const std::vector<std::uint8_t> wrong_len(99, 0);
  CHECK_THROWS_AS(fit_the_fit(d, wrong_len, 3, 10), ValidationError);
  CHECK_THROWS_AS(fit_the_fit(d, all_zero, -1, 10), ValidationError);
  CHECK_THROWS_AS(fit_the_fit(d, all_zero, 3, 0), ValidationError);
}

namespace {

// Dataset with a real study/target split: outcome observed on study rows
// only, predictors drawn with a configurable mean shift on the target side.
Dataset split_dgp(std::size_t n_study, std::size_t n_target, double shift,
                  std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = n_study + n_target;
  Dataset d;
  d.outcome_index = 0;
  d.split.assign(n, SplitLabel::study);
  Column y;
  y.name = "y";
  y.values.assign(n, 0.0);
  y.missing.assign(n, 0);
  Column x1;
  x1.name = "x1";
  x1.missing.assign(n, 0);
  Column x2;
  x2.name = "x2";
  x2.missing.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const bool target = i >= n_study;
    if (target) {
      d.split[i] = SplitLabel::target;
      y.missing[i] = 1;
    }
    x1.values.push_back(rng.normal() + (target ? shift : 0.0));
    x2.values.push_back(rng.normal());
    if (!target) y.values[i] = x1.values[i] + rng.normal();
  }
  d.columns = {y, x1, x2};
  return d;
}

}  // namespace

TEST_CASE("overlap score on identical covariate distributions") {
  const Dataset d = split_dgp(1000, 1000, 0.0, 37);
  const OverlapReport report = overlap_score(d);
  CHECK(report.converged);
  CHECK(report.auc <= 0.55);
  double trimmed = 0.0;
  for (auto t : report.trimmed) trimmed += t;
  CHECK(trimmed / 2000.0 <= 0.01);
  for (double s : report.score) {
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
}

TEST_CASE("overlap score separates shifted splits") {
  const Dataset d = split_dgp(400, 400, 5.0, 41);
  const OverlapReport report = overlap_score(d);
  CHECK(report.auc >= 0.99);
  // Higher x1 means target, so its raw coefficient must be negative.
  CHECK(report.coefficients[1] < 0.0);
}

TEST_CASE("overlap score is symmetric under label swap") {
  Dataset d = split_dgp(300, 300, 0.8, 43);
  Dataset flipped = d;
  for (std::size_t i = 0; i < flipped.split.size(); ++i) {
    flipped.split[i] = flipped.split[i] == SplitLabel::study ? SplitLabel::target
                                                             : SplitLabel::study;
  }
  const OverlapReport a = overlap_score(d);
  const OverlapReport b = overlap_score(flipped);
  REQUIRE(a.score.size() == b.score.size());
  for (std::size_t i = 0; i < a.score.size(); ++i) {
    CHECK(std::abs(a.score[i] - (1.0 - b.score[i])) <= 1e-6);
  }
}

TEST_CASE("overlap score ignores constant predictors with a warning") {
  Dataset d = split_dgp(100, 100, 0.5, 47);
  for (double& v : d.columns[2].values) v = 3.0;
  const OverlapReport report = overlap_score(d);
  bool mentioned = false;
  for (const std::string& w : report.warnings) {
    mentioned = mentioned || w.find("x2") != std::string::npos;
  }
  CHECK(mentioned);
  CHECK(report.coefficients[2] == 0.0);

  Dataset no_target = split_dgp(50, 0, 0.0, 49);
  CHECK_THROWS_AS(overlap_score(no_target), ValidationError);
}

TEST_CASE("kfold cv on a memorizable noiseless signal") {
  Dataset d = testutil::linear_dgp(1200, 2, 0.0, 53);
  RegressorConfig cfg;
  cfg.kind = RegressorKind::random_forest;
  cfg.trees = 150;
  cfg.forest.min_node = 1;
  cfg.forest.mtry = 2;
  cfg.seed = 3;
  cfg.threads = 4;
  const CvResult cv = kfold_cv(d, cfg, 10, 11);
  REQUIRE(cv.fold_rmse.size() == 10);
  // Held-out error is pure interpolation error for a memorizing forest on a
  // noiseless linear signal; it stays far below the outcome scale.
  const double sd_y = stddev(d.outcome().values);
  CHECK(cv.mean_rmse <= 0.1 * sd_y);
  CHECK(cv.mean_r2 >= 0.99);

  // Aggregates are plain fold means.
  CHECK(cv.mean_rmse == doctest::Approx(mean(cv.fold_rmse)).epsilon(1e-12));
  CHECK(cv.mean_mae == doctest::Approx(mean(cv.fold_mae)).epsilon(1e-12));
}

TEST_CASE("kfold cv determinism and validation") {
  Dataset d = testutil::linear_dgp(200, 2, 0.4, 59);
  RegressorConfig cfg;
  cfg.kind = RegressorKind::random_forest;
  cfg.trees = 30;
  cfg.seed = 5;
  const CvResult a = kfold_cv(d, cfg, 5, 7);
  const CvResult b = kfold_cv(d, cfg, 5, 7);
  CHECK(a.fold_rmse == b.fold_rmse);
  const CvResult c = kfold_cv(d, cfg, 5, 8);
  CHECK(a.fold_rmse != c.fold_rmse);

  CHECK_THROWS_AS(kfold_cv(d, cfg, 1, 7), ValidationError);
  Dataset tiny = testutil::linear_dgp(15, 2, 0.4, 61);
  CHECK_THROWS_AS(kfold_cv(tiny, cfg, 10, 7), ValidationError);
}

namespace {

// Study and target drawn from one DGP; the proxy column z is observed on
// both sides while the outcome y only exists on the study side.
Dataset proxy_dgp(std::size_t n_study, std::size_t n_target, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = n_study + n_target;
  Dataset d;
  d.outcome_index = 0;
  d.split.assign(n, SplitLabel::study);
  Column y{"y", ColumnKind::continuous, std::vector<double>(n, 0.0),
           std::vector<std::uint8_t>(n, 0), {}};
  Column z{"z", ColumnKind::continuous, {}, std::vector<std::uint8_t>(n, 0), {}};
  Column x1{"x1", ColumnKind::continuous, {}, std::vector<std::uint8_t>(n, 0), {}};
  Column x2{"x2", ColumnKind::continuous, {}, std::vector<std::uint8_t>(n, 0), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const bool target = i >= n_study;
    if (target) {
      d.split[i] = SplitLabel::target;
      y.missing[i] = 1;
    }
    x1.values.push_back(rng.normal());
    x2.values.push_back(rng.normal());
    z.values.push_back(0.8 * x1.values[i] - 0.5 * x2.values[i] + 0.4 * rng.normal());
    if (!target) y.values[i] = z.values[i] + 0.2 * rng.normal();
  }
  d.columns = {y, z, x1, x2};
  return d;
}

}  // namespace

TEST_CASE("cross-population cv matches within-study cv on a shared DGP") {
  double within_sum = 0.0;
  double cross_sum = 0.0;
  const int seeds = 20;
  RegressorConfig cfg;
  cfg.kind = RegressorKind::random_forest;
  cfg.trees = 40;
  cfg.threads = 4;
  for (int s = 0; s < seeds; ++s) {
    const Dataset d = proxy_dgp(300, 300, 500 + static_cast<std::uint64_t>(s));
    cfg.seed = static_cast<std::uint64_t>(s + 1);
    const CvResult cross = cross_population_cv(d, "z", cfg, 5, 13);

    // Within-study comparison: same rows, proxy as the outcome.
    Dataset within;
    within.outcome_index = 0;
    const std::vector<std::size_t> study = d.study_rows();
    within.split.assign(study.size(), SplitLabel::study);
    for (const char* name : {"z", "x1", "x2"}) {
      const Column& src = d.columns[static_cast<std::size_t>(d.column_index(name))];
      Column col;
      col.name = src.name;
      for (std::size_t i : study) {
        col.values.push_back(src.values[i]);
        col.missing.push_back(0);
      }
      within.columns.push_back(std::move(col));
    }
    const CvResult inside = kfold_cv(within, cfg, 5, 13);
    within_sum += inside.mean_r2;
    cross_sum += cross.mean_r2;
    CHECK(std::abs(cross.mean_r2 - inside.mean_r2) <= 0.15);
  }
  CHECK(std::abs(cross_sum / seeds - within_sum / seeds) <= 0.05);
}

TEST_CASE("cross-population cv validation and degenerate proxies") {
  Dataset d = proxy_dgp(120, 60, 71);
  RegressorConfig cfg;
  cfg.kind = RegressorKind::random_forest;
  cfg.trees = 10;
  cfg.seed = 1;

  CHECK_THROWS_AS(cross_population_cv(d, "nope", cfg, 5, 1), ValidationError);
  CHECK_THROWS_AS(cross_population_cv(d, "y", cfg, 5, 1), ValidationError);

  Dataset missing_proxy = d;
  missing_proxy.columns[1].missing[130] = 1;
  CHECK_THROWS_AS(cross_population_cv(missing_proxy, "z", cfg, 5, 1), ValidationError);

  // Constant proxy on the target side: every fold's r2 is undefined.
  Dataset flat = d;
  for (std::size_t i : flat.target_rows()) flat.columns[1].values[i] = 1.0;
  const CvResult cv = cross_population_cv(flat, "z", cfg, 5, 1);
  for (auto def : cv.r2_defined) CHECK(def == 0);
  REQUIRE(!cv.warnings.empty());
  CHECK(cv.warnings[0].find("constant outcome") != std::string::npos);
}
