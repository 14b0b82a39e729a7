#include "predsens/forest.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "predsens/errors.hpp"
#include "predsens/parallel.hpp"
#include "predsens/rng.hpp"
#include "predsens/stats.hpp"

namespace predsens {
namespace {

constexpr std::uint64_t kTreeStream = 101;
constexpr std::uint64_t kRefitStream = 102;

struct BuildParams {
  int mtry = 1;
  int min_node = 5;
  // Nodes whose residual sum of squares falls below this are leaves. Keeps
  // the builder from chasing floating-point dust on pure nodes.
  double sse_floor = 0.0;
};

struct SplitChoice {
  int var = -1;
  double threshold = 0.0;
  double decrease = 0.0;
};

// Best variance-reducing split of `rows` on feature `f`, or var = -1 when no
// admissible split exists. Thresholds are midpoints between adjacent distinct
// values so ties in the feature never straddle a cut.
SplitChoice best_split_on_feature(const Table& x, const std::vector<double>& y,
                                  const std::vector<std::size_t>& rows, int f,
                                  int min_node, double node_sse, double node_sum,
                                  double node_sumsq) {
  const std::size_t n = rows.size();
  std::vector<std::pair<double, double>> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = {x.cols[static_cast<std::size_t>(f)][rows[i]], y[rows[i]]};
  }
  std::sort(pts.begin(), pts.end());

  SplitChoice best;
  double sum_l = 0.0;
  double sumsq_l = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    sum_l += pts[i].second;
    sumsq_l += pts[i].second * pts[i].second;
    const std::size_t n_l = i + 1;
    const std::size_t n_r = n - n_l;
    if (n_l < static_cast<std::size_t>(min_node)) continue;
    if (n_r < static_cast<std::size_t>(min_node)) break;
    if (!(pts[i].first < pts[i + 1].first)) continue;
    const double sse_l = sumsq_l - sum_l * sum_l / static_cast<double>(n_l);
    const double sum_r = node_sum - sum_l;
    const double sse_r =
        (node_sumsq - sumsq_l) - sum_r * sum_r / static_cast<double>(n_r);
    const double decrease = node_sse - sse_l - sse_r;
    if (decrease > best.decrease) {
      best.var = f;
      best.threshold = pts[i].first * 0.5 + pts[i + 1].first * 0.5;
      best.decrease = decrease;
    }
  }
  return best;
}

// Grows one regression tree over the given row multiset. Split decreases are
// accumulated into `importance` (length = feature count).
Tree build_tree(const Table& x, const std::vector<double>& y,
                std::vector<std::size_t> root_rows, const BuildParams& params,
                Rng& rng, std::vector<double>& importance) {
  const int p = static_cast<int>(x.n_cols());
  Tree tree;
  tree.nodes.push_back(TreeNode{});

  std::vector<int> feats(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) feats[static_cast<std::size_t>(j)] = j;

  struct Job {
    int node;
    std::vector<std::size_t> rows;
  };
  std::vector<Job> stack;
  stack.push_back({0, std::move(root_rows)});

  while (!stack.empty()) {
    Job job = std::move(stack.back());
    stack.pop_back();
    TreeNode& node = tree.nodes[static_cast<std::size_t>(job.node)];

    const std::size_t n = job.rows.size();
    double sum = 0.0;
    double sumsq = 0.0;
    for (std::size_t r : job.rows) {
      sum += y[r];
      sumsq += y[r] * y[r];
    }
    node.value = sum / static_cast<double>(n);
    const double sse = sumsq - sum * sum / static_cast<double>(n);
    if (n < 2 * static_cast<std::size_t>(params.min_node) ||
        sse <= params.sse_floor * static_cast<double>(n)) {
      continue;
    }

    // Sample mtry candidate features without replacement, then look for the
    // best split among them.
    for (int i = 0; i < params.mtry; ++i) {
      const int j = i + static_cast<int>(rng.uniform_int(
                            static_cast<std::uint64_t>(p - i)));
      std::swap(feats[static_cast<std::size_t>(i)],
                feats[static_cast<std::size_t>(j)]);
    }
    SplitChoice best;
    for (int i = 0; i < params.mtry; ++i) {
      SplitChoice c = best_split_on_feature(x, y, job.rows,
                                            feats[static_cast<std::size_t>(i)],
                                            params.min_node, sse, sum, sumsq);
      if (c.decrease > best.decrease) best = c;
    }
    if (best.var < 0) {
      // The sampled candidates were all constant (or tied) on this node, but
      // the node is still impure. Widen the search to the remaining features
      // so an impure node with any usable split never stalls as a leaf.
      for (int i = params.mtry; i < p; ++i) {
        SplitChoice c = best_split_on_feature(
            x, y, job.rows, feats[static_cast<std::size_t>(i)],
            params.min_node, sse, sum, sumsq);
        if (c.decrease > best.decrease) best = c;
      }
    }
    if (best.var < 0) continue;

    importance[static_cast<std::size_t>(best.var)] += best.decrease;

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    left_rows.reserve(n);
    right_rows.reserve(n);
    const auto& col = x.cols[static_cast<std::size_t>(best.var)];
    for (std::size_t r : job.rows) {
      (col[r] <= best.threshold ? left_rows : right_rows).push_back(r);
    }

    const int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    const int right_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    // `node` reference may be stale after push_back; reindex.
    TreeNode& parent = tree.nodes[static_cast<std::size_t>(job.node)];
    parent.var = best.var;
    parent.threshold = best.threshold;
    parent.left = left_id;
    parent.right = right_id;
    stack.push_back({right_id, std::move(right_rows)});
    stack.push_back({left_id, std::move(left_rows)});
  }
  return tree;
}

int resolve_mtry(int requested, std::size_t p) {
  if (requested > 0) return std::min(requested, static_cast<int>(p));
  return static_cast<int>((p + 2) / 3);  // ceil(p / 3)
}

}  // namespace

ForestModel::ForestModel(Table x, std::vector<double> y,
                         const RegressorConfig& config)
    : config_(config), x_(std::move(x)), y_(std::move(y)) {
  fit();
}

void ForestModel::fit() {
  const std::size_t n = x_.n_rows();
  const std::size_t p = x_.n_cols();
  const int n_trees = config_.effective_trees();
  BuildParams params;
  params.mtry = resolve_mtry(config_.forest.mtry, p);
  params.min_node = config_.forest.min_node;
  params.sse_floor = 1e-12 * variance(y_);

  trees_.assign(static_cast<std::size_t>(n_trees), Tree{});
  std::vector<std::vector<double>> tree_imp(
      static_cast<std::size_t>(n_trees), std::vector<double>(p, 0.0));

  const int threads = resolve_threads(config_.threads);
  parallel_for(static_cast<std::size_t>(n_trees), threads, [&](std::size_t t) {
    Rng rng(derive_seed(config_.seed, {kTreeStream, t}));
    std::vector<std::size_t> rows(n);
    if (config_.forest.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) rows[i] = rng.uniform_int(n);
    } else {
      for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    }
    trees_[t] = build_tree(x_, y_, std::move(rows), params, rng, tree_imp[t]);
  });

  importance_.assign(p, 0.0);
  for (const auto& imp : tree_imp) {
    for (std::size_t j = 0; j < p; ++j) importance_[j] += imp[j];
  }
  double total = 0.0;
  for (double v : importance_) total += v;
  if (total > 0.0) {
    for (double& v : importance_) v /= total;
  } else {
    std::fill(importance_.begin(), importance_.end(), 1.0 / static_cast<double>(p));
  }

  const std::vector<double> fitted = point_predict(x_);
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = y_[i] - fitted[i];
    sse += d * d;
  }
  const double sst = variance(y_) * static_cast<double>(n - 1);
  summary_.rmse = std::sqrt(sse / static_cast<double>(n));
  summary_.r2 = sst > 0.0 ? 1.0 - sse / sst : 0.0;
}

std::vector<double> ForestModel::point_predict(const Table& rows) const {
  check_schema(rows);
  std::vector<double> out(rows.n_rows(), 0.0);
  for (std::size_t i = 0; i < rows.n_rows(); ++i) {
    double acc = 0.0;
    for (const Tree& tree : trees_) acc += tree.predict_row(rows, i);
    out[i] = acc / static_cast<double>(trees_.size());
  }
  return out;
}

PredictiveDistribution ForestModel::predict_distribution(const Table& rows, int b,
                                                         BootstrapMode mode) const {
  check_schema(rows);
  if (b < 1) throw ValidationError("predict_distribution: draw count must be >= 1");
  const std::size_t n = rows.n_rows();
  const std::size_t n_trees = trees_.size();

  bool direct = false;
  switch (mode) {
    case BootstrapMode::direct:
      if (static_cast<std::size_t>(b) > n_trees) {
        throw ValidationError(
            "predict_distribution: direct mode needs draw count <= tree count");
      }
      direct = true;
      break;
    case BootstrapMode::refit:
      direct = false;
      break;
    case BootstrapMode::automatic:
      direct = static_cast<std::size_t>(b) <= n_trees;
      break;
  }

  PredictiveDistribution dist(n, static_cast<std::size_t>(b));
  if (direct) {
    // Each draw is one tree's prediction; trees are taken evenly spaced so a
    // small draw count still spans the whole ensemble.
    for (int k = 0; k < b; ++k) {
      const std::size_t idx =
          static_cast<std::size_t>(k) * n_trees / static_cast<std::size_t>(b);
      const Tree& tree = trees_[idx];
      for (std::size_t i = 0; i < n; ++i) {
        dist.at(i, static_cast<std::size_t>(k)) = tree.predict_row(rows, i);
      }
    }
    return dist;
  }

  // Refit mode: every draw is the point prediction of a fresh forest trained
  // on a bootstrap resample of the stored training data.
  const std::size_t n_train = x_.n_rows();
  const int threads = resolve_threads(config_.threads);
  parallel_for(static_cast<std::size_t>(b), threads, [&](std::size_t k) {
    Rng rng(derive_seed(config_.seed, {kRefitStream, k}));
    std::vector<std::size_t> sample(n_train);
    for (std::size_t i = 0; i < n_train; ++i) sample[i] = rng.uniform_int(n_train);
    Table bx = x_.subset(sample);
    std::vector<double> by(n_train);
    for (std::size_t i = 0; i < n_train; ++i) by[i] = y_[sample[i]];
    RegressorConfig cfg = config_;
    cfg.seed = derive_seed(config_.seed, {kRefitStream, k, 1});
    cfg.threads = 1;  // the draws themselves are already parallel
    ForestModel refit(std::move(bx), std::move(by), cfg);
    const std::vector<double> pred = refit.point_predict(rows);
    for (std::size_t i = 0; i < n; ++i) dist.at(i, k) = pred[i];
  });
  return dist;
}

nlohmann::ordered_json ForestModel::to_json() const {
  nlohmann::ordered_json out;
  out["format"] = "predsens_model";
  out["version"] = 1;
  out["kind"] = "random_forest";
  out["config"] = {{"trees", config_.effective_trees()},
                   {"mtry", config_.forest.mtry},
                   {"min_node", config_.forest.min_node},
                   {"bootstrap", config_.forest.bootstrap},
                   {"seed", config_.seed}};
  out["names"] = x_.names;
  out["importance"] = importance_;
  out["training"] = {{"rmse", summary_.rmse}, {"r2", summary_.r2}};
  nlohmann::ordered_json trees = nlohmann::ordered_json::array();
  for (const Tree& tree : trees_) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const TreeNode& nd : tree.nodes) {
      nodes.push_back({nd.var, nd.threshold, nd.left, nd.right, nd.value});
    }
    trees.push_back(std::move(nodes));
  }
  out["trees"] = std::move(trees);
  out["data"] = {{"x", x_.cols}, {"y", y_}};
  return out;
}

std::unique_ptr<ForestModel> ForestModel::from_json(
    const nlohmann::ordered_json& blob) {
  std::unique_ptr<ForestModel> model(new ForestModel());
  const auto& cfg = blob.at("config");
  model->config_.kind = RegressorKind::random_forest;
  model->config_.trees = cfg.at("trees").get<int>();
  model->config_.forest.mtry = cfg.at("mtry").get<int>();
  model->config_.forest.min_node = cfg.at("min_node").get<int>();
  model->config_.forest.bootstrap = cfg.at("bootstrap").get<bool>();
  model->config_.seed = cfg.at("seed").get<std::uint64_t>();
  model->x_.names = blob.at("names").get<std::vector<std::string>>();
  model->x_.cols =
      blob.at("data").at("x").get<std::vector<std::vector<double>>>();
  model->y_ = blob.at("data").at("y").get<std::vector<double>>();
  model->importance_ = blob.at("importance").get<std::vector<double>>();
  model->summary_.rmse = blob.at("training").at("rmse").get<double>();
  model->summary_.r2 = blob.at("training").at("r2").get<double>();
  for (const auto& jt : blob.at("trees")) {
    Tree tree;
    for (const auto& jn : jt) {
      TreeNode nd;
      nd.var = jn.at(0).get<int>();
      nd.threshold = jn.at(1).get<double>();
      nd.left = jn.at(2).get<int>();
      nd.right = jn.at(3).get<int>();
      nd.value = jn.at(4).get<double>();
      tree.nodes.push_back(nd);
    }
    model->trees_.push_back(std::move(tree));
  }
  return model;
}

}  // namespace predsens
