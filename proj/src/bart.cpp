#include "predsens/bart.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "predsens/errors.hpp"
#include "predsens/rng.hpp"
#include "predsens/stats.hpp"

namespace predsens {
namespace {

constexpr std::uint64_t kChainStream = 201;
constexpr std::uint64_t kNoiseStream = 202;
constexpr std::uint64_t kRefitStream = 203;

// Mutable tree used inside the sampler. Leaves own their row lists; internal
// nodes keep them empty. Pruned nodes go on a free list for reuse.
struct MNode {
  int var = -1;
  double thr = 0.0;
  int left = -1;
  int right = -1;
  int parent = -1;
  int depth = 0;
  double mu = 0.0;
  bool alive = true;
  std::vector<int> rows;
};

struct McmcTree {
  std::vector<MNode> nodes;
  std::vector<int> spare;

  void reset(int n_rows) {
    nodes.assign(1, MNode{});
    spare.clear();
    nodes[0].rows.resize(static_cast<std::size_t>(n_rows));
    std::iota(nodes[0].rows.begin(), nodes[0].rows.end(), 0);
  }

  int alloc() {
    if (!spare.empty()) {
      const int id = spare.back();
      spare.pop_back();
      nodes[static_cast<std::size_t>(id)] = MNode{};
      return id;
    }
    nodes.push_back(MNode{});
    return static_cast<int>(nodes.size()) - 1;
  }

  bool is_leaf(int id) const { return nodes[static_cast<std::size_t>(id)].var < 0; }
  bool root_only() const { return is_leaf(0); }

  void collect_leaves(std::vector<int>& out) const {
    out.clear();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].alive && nodes[i].var < 0) out.push_back(static_cast<int>(i));
    }
  }

  // Internal nodes whose children are both leaves; the only prune targets.
  void collect_prunable(std::vector<int>& out) const {
    out.clear();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const MNode& nd = nodes[i];
      if (nd.alive && nd.var >= 0 && is_leaf(nd.left) && is_leaf(nd.right)) {
        out.push_back(static_cast<int>(i));
      }
    }
  }
};

// Log marginal likelihood of one leaf's residuals with the mean integrated
// out, dropping terms that cancel between competing tree structures.
double leaf_log_marginal(double n, double s, double sigma2, double sigma_mu2) {
  const double denom = sigma2 + n * sigma_mu2;
  return 0.5 * (std::log(sigma2) - std::log(denom)) +
         sigma_mu2 * s * s / (2.0 * sigma2 * denom);
}

}  // namespace

BartModel::BartModel(Table x, std::vector<double> y, const RegressorConfig& config)
    : config_(config), x_(std::move(x)), y_(std::move(y)) {
  fit();
}

void BartModel::fit() {
  const std::size_t n = x_.n_rows();
  const std::size_t p = x_.n_cols();
  const int n_trees = config_.effective_trees();
  const BartParams& bp = config_.bart;

  y_mean_ = mean(y_);
  std::vector<double> y_c(n);
  for (std::size_t i = 0; i < n; ++i) y_c[i] = y_[i] - y_mean_;

  // Leaf prior: three prior standard deviations of the summed tree effects
  // should span half the observed response range.
  const auto [y_lo, y_hi] = std::minmax_element(y_.begin(), y_.end());
  const double halfrange = (*y_hi - *y_lo) / 2.0;
  const double q = bp.node_scale_q > 0 ? static_cast<double>(bp.node_scale_q)
                                       : static_cast<double>(n_trees);
  const double sigma_mu = halfrange / 3.0 / std::sqrt(q);
  sigma_mu2_ = sigma_mu * sigma_mu;

  // Noise prior: scale the inverse-chi-squared so a linear fit's residual
  // variance sits at the `sigma_quantile` point of the prior.
  double s2_hat;
  {
    Eigen::MatrixXd a(n, p + 1);
    Eigen::VectorXd b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a(static_cast<Eigen::Index>(i), 0) = 1.0;
      for (std::size_t j = 0; j < p; ++j) {
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) =
            x_.cols[j][i];
      }
      b(static_cast<Eigen::Index>(i)) = y_c[i];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    const Eigen::VectorXd resid = b - a * qr.solve(b);
    const double dof = static_cast<double>(n) - static_cast<double>(qr.rank());
    const double var_y = variance(y_);
    s2_hat = dof >= 1.0 ? resid.squaredNorm() / dof : var_y;
    s2_hat = std::max(s2_hat, 1e-8 * var_y);
  }
  const double nu = static_cast<double>(bp.sigma_df);
  lambda_ = s2_hat * chi_squared_quantile(1.0 - bp.sigma_quantile, nu) / nu;

  Rng rng(derive_seed(config_.seed, {kChainStream}));
  std::vector<McmcTree> trees(static_cast<std::size_t>(n_trees));
  for (auto& t : trees) t.reset(static_cast<int>(n));
  std::vector<double> g(n, 0.0);
  double sigma2 = s2_hat;

  const int total_sweeps = bp.burn_in + bp.draws;
  ensembles_.clear();
  sigma2_chain_.clear();
  ensembles_.reserve(static_cast<std::size_t>(bp.draws));
  sigma2_chain_.reserve(static_cast<std::size_t>(bp.draws));
  std::vector<std::size_t> split_counts(p, 0);

  std::vector<double> resid(n);
  std::vector<int> leaves;
  std::vector<int> prunable;
  std::vector<double> cuts;

  for (int sweep = 0; sweep < total_sweeps; ++sweep) {
    for (auto& tree : trees) {
      // Detach this tree's contribution so `resid` is the partial residual
      // it must explain.
      tree.collect_leaves(leaves);
      for (int lf : leaves) {
        const MNode& nd = tree.nodes[static_cast<std::size_t>(lf)];
        for (int r : nd.rows) g[static_cast<std::size_t>(r)] -= nd.mu;
      }
      for (std::size_t i = 0; i < n; ++i) resid[i] = y_c[i] - g[i];

      tree.collect_prunable(prunable);
      const double b_now = static_cast<double>(leaves.size());
      const double w_now = static_cast<double>(prunable.size());
      const double p_grow_now = tree.root_only() ? 1.0 : 0.5;

      if (rng.uniform() < p_grow_now) {
        // Grow: split a uniformly chosen leaf on a uniformly chosen variable
        // at a uniformly chosen distinct value (the leaf maximum is excluded
        // so both children are nonempty).
        const int leaf_id = leaves[rng.uniform_int(leaves.size())];
        MNode& leaf = tree.nodes[static_cast<std::size_t>(leaf_id)];
        const int var = static_cast<int>(rng.uniform_int(p));
        cuts.clear();
        for (int r : leaf.rows) {
          cuts.push_back(x_.cols[static_cast<std::size_t>(var)]
                               [static_cast<std::size_t>(r)]);
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        if (cuts.size() >= 2) {
          const double thr = cuts[rng.uniform_int(cuts.size() - 1)];
          double n_l = 0.0;
          double s_l = 0.0;
          double s_all = 0.0;
          for (int r : leaf.rows) {
            const double rv = resid[static_cast<std::size_t>(r)];
            s_all += rv;
            if (x_.cols[static_cast<std::size_t>(var)]
                       [static_cast<std::size_t>(r)] <= thr) {
              n_l += 1.0;
              s_l += rv;
            }
          }
          const double n_all = static_cast<double>(leaf.rows.size());
          const double n_r = n_all - n_l;
          const double s_r = s_all - s_l;

          const double ps_d = depth_split_probability(leaf.depth, bp.beta, bp.eta);
          const double ps_d1 =
              depth_split_probability(leaf.depth + 1, bp.beta, bp.eta);
          const bool parent_prunable =
              leaf.parent >= 0 &&
              tree.is_leaf(
                  tree.nodes[static_cast<std::size_t>(leaf.parent)].left ==
                          leaf_id
                      ? tree.nodes[static_cast<std::size_t>(leaf.parent)].right
                      : tree.nodes[static_cast<std::size_t>(leaf.parent)].left);
          const double w_after = w_now + 1.0 - (parent_prunable ? 1.0 : 0.0);

          const double log_accept =
              std::log(ps_d) + 2.0 * std::log(1.0 - ps_d1) -
              std::log(1.0 - ps_d) + std::log(0.5) - std::log(w_after) -
              std::log(p_grow_now) + std::log(b_now) +
              leaf_log_marginal(n_l, s_l, sigma2, sigma_mu2_) +
              leaf_log_marginal(n_r, s_r, sigma2, sigma_mu2_) -
              leaf_log_marginal(n_all, s_all, sigma2, sigma_mu2_);

          if (std::log(rng.uniform()) < log_accept) {
            const int left_id = tree.alloc();
            const int right_id = tree.alloc();
            MNode& nd = tree.nodes[static_cast<std::size_t>(leaf_id)];
            MNode& lnode = tree.nodes[static_cast<std::size_t>(left_id)];
            MNode& rnode = tree.nodes[static_cast<std::size_t>(right_id)];
            lnode.parent = leaf_id;
            rnode.parent = leaf_id;
            lnode.depth = nd.depth + 1;
            rnode.depth = nd.depth + 1;
            for (int r : nd.rows) {
              if (x_.cols[static_cast<std::size_t>(var)]
                         [static_cast<std::size_t>(r)] <= thr) {
                lnode.rows.push_back(r);
              } else {
                rnode.rows.push_back(r);
              }
            }
            nd.rows.clear();
            nd.rows.shrink_to_fit();
            nd.var = var;
            nd.thr = thr;
            nd.left = left_id;
            nd.right = right_id;
          }
        }
      } else if (!prunable.empty()) {
        // Prune: collapse a uniformly chosen internal node with two leaf
        // children back into a leaf. Mirror image of the grow acceptance.
        const int node_id = prunable[rng.uniform_int(prunable.size())];
        MNode& nd = tree.nodes[static_cast<std::size_t>(node_id)];
        MNode& lnode = tree.nodes[static_cast<std::size_t>(nd.left)];
        MNode& rnode = tree.nodes[static_cast<std::size_t>(nd.right)];

        double n_l = 0.0;
        double s_l = 0.0;
        for (int r : lnode.rows) {
          n_l += 1.0;
          s_l += resid[static_cast<std::size_t>(r)];
        }
        double n_r = 0.0;
        double s_r = 0.0;
        for (int r : rnode.rows) {
          n_r += 1.0;
          s_r += resid[static_cast<std::size_t>(r)];
        }

        const double ps_d = depth_split_probability(nd.depth, bp.beta, bp.eta);
        const double ps_d1 =
            depth_split_probability(nd.depth + 1, bp.beta, bp.eta);
        const double b_after = b_now - 1.0;
        const bool root_after = node_id == 0;
        const double p_grow_after = root_after ? 1.0 : 0.5;

        const double log_accept =
            -(std::log(ps_d) + 2.0 * std::log(1.0 - ps_d1) -
              std::log(1.0 - ps_d)) +
            std::log(p_grow_after) - std::log(b_after) - std::log(0.5) +
            std::log(w_now) -
            (leaf_log_marginal(n_l, s_l, sigma2, sigma_mu2_) +
             leaf_log_marginal(n_r, s_r, sigma2, sigma_mu2_) -
             leaf_log_marginal(n_l + n_r, s_l + s_r, sigma2, sigma_mu2_));

        if (std::log(rng.uniform()) < log_accept) {
          nd.rows.reserve(lnode.rows.size() + rnode.rows.size());
          nd.rows.insert(nd.rows.end(), lnode.rows.begin(), lnode.rows.end());
          nd.rows.insert(nd.rows.end(), rnode.rows.begin(), rnode.rows.end());
          lnode.alive = false;
          rnode.alive = false;
          lnode.rows.clear();
          rnode.rows.clear();
          tree.spare.push_back(nd.left);
          tree.spare.push_back(nd.right);
          nd.var = -1;
          nd.left = -1;
          nd.right = -1;
        }
      }

      // Gibbs step for every leaf mean, then put the tree back into the fit.
      tree.collect_leaves(leaves);
      for (int lf : leaves) {
        MNode& nd = tree.nodes[static_cast<std::size_t>(lf)];
        const double n_leaf = static_cast<double>(nd.rows.size());
        double s = 0.0;
        for (int r : nd.rows) s += resid[static_cast<std::size_t>(r)];
        const double denom = sigma2 + n_leaf * sigma_mu2_;
        const double post_mean = sigma_mu2_ * s / denom;
        const double post_sd = std::sqrt(sigma_mu2_ * sigma2 / denom);
        nd.mu = rng.normal(post_mean, post_sd);
        for (int r : nd.rows) g[static_cast<std::size_t>(r)] += nd.mu;
      }
    }

    // Noise variance: conjugate scaled-inverse-chi-squared update.
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = y_c[i] - g[i];
      sse += d * d;
    }
    sigma2 = (nu * lambda_ + sse) / rng.chi_squared(nu + static_cast<double>(n));

    if (sweep >= bp.burn_in) {
      std::vector<Tree> snapshot;
      snapshot.reserve(trees.size());
      for (const auto& tree : trees) {
        Tree flat;
        std::vector<int> remap(tree.nodes.size(), -1);
        // Pass 1: assign compact ids in node-id order (root stays first).
        for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
          if (tree.nodes[i].alive) {
            remap[i] = static_cast<int>(flat.nodes.size());
            flat.nodes.push_back(TreeNode{});
          }
        }
        for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
          const MNode& nd = tree.nodes[i];
          if (!nd.alive) continue;
          TreeNode& out = flat.nodes[static_cast<std::size_t>(remap[i])];
          if (nd.var >= 0) {
            out.var = nd.var;
            out.threshold = nd.thr;
            out.left = remap[static_cast<std::size_t>(nd.left)];
            out.right = remap[static_cast<std::size_t>(nd.right)];
            split_counts[static_cast<std::size_t>(nd.var)] += 1;
          } else {
            out.value = nd.mu;
          }
        }
        snapshot.push_back(std::move(flat));
      }
      ensembles_.push_back(std::move(snapshot));
      sigma2_chain_.push_back(sigma2);
    }
  }

  std::size_t total_splits = 0;
  for (std::size_t c : split_counts) total_splits += c;
  importance_.assign(p, 0.0);
  if (total_splits > 0) {
    for (std::size_t j = 0; j < p; ++j) {
      importance_[j] =
          static_cast<double>(split_counts[j]) / static_cast<double>(total_splits);
    }
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

double BartModel::ensemble_value(std::size_t draw, const Table& rows,
                                 std::size_t row) const {
  double acc = y_mean_;
  for (const Tree& tree : ensembles_[draw]) acc += tree.predict_row(rows, row);
  return acc;
}

std::vector<double> BartModel::point_predict(const Table& rows) const {
  check_schema(rows);
  const std::size_t n_draws = ensembles_.size();
  std::vector<double> out(rows.n_rows(), 0.0);
  for (std::size_t i = 0; i < rows.n_rows(); ++i) {
    double acc = 0.0;
    for (std::size_t d = 0; d < n_draws; ++d) acc += ensemble_value(d, rows, i);
    out[i] = acc / static_cast<double>(n_draws);
  }
  return out;
}

PredictiveDistribution BartModel::predict_distribution(const Table& rows, int b,
                                                       BootstrapMode mode) const {
  check_schema(rows);
  if (b < 1) throw ValidationError("predict_distribution: draw count must be >= 1");
  const std::size_t n = rows.n_rows();
  const std::size_t n_draws = ensembles_.size();

  bool direct = false;
  switch (mode) {
    case BootstrapMode::direct:
      if (static_cast<std::size_t>(b) > n_draws) {
        throw ValidationError(
            "predict_distribution: direct mode needs draw count <= retained draws");
      }
      direct = true;
      break;
    case BootstrapMode::refit:
      direct = false;
      break;
    case BootstrapMode::automatic:
      direct = static_cast<std::size_t>(b) <= n_draws;
      break;
  }

  PredictiveDistribution dist(n, static_cast<std::size_t>(b));
  if (direct) {
    // Evenly spaced posterior draws; each contributes its mean function plus
    // a fresh draw of the observation noise.
    for (int k = 0; k < b; ++k) {
      const std::size_t idx =
          static_cast<std::size_t>(k) * n_draws / static_cast<std::size_t>(b);
      Rng rng(derive_seed(config_.seed, {kNoiseStream, static_cast<std::uint64_t>(k)}));
      const double sd = std::sqrt(sigma2_chain_[idx]);
      for (std::size_t i = 0; i < n; ++i) {
        dist.at(i, static_cast<std::size_t>(k)) =
            ensemble_value(idx, rows, i) + rng.normal(0.0, sd);
      }
    }
    return dist;
  }

  // Refit mode: each draw retrains the sampler on a bootstrap resample.
  const std::size_t n_train = x_.n_rows();
  for (int k = 0; k < b; ++k) {
    Rng rng(derive_seed(config_.seed, {kRefitStream, static_cast<std::uint64_t>(k)}));
    std::vector<std::size_t> sample(n_train);
    for (std::size_t i = 0; i < n_train; ++i) sample[i] = rng.uniform_int(n_train);
    Table bx = x_.subset(sample);
    std::vector<double> by(n_train);
    for (std::size_t i = 0; i < n_train; ++i) by[i] = y_[sample[i]];
    RegressorConfig cfg = config_;
    cfg.seed = derive_seed(config_.seed, {kRefitStream, static_cast<std::uint64_t>(k), 1});
    BartModel refit(std::move(bx), std::move(by), cfg);
    const std::vector<double> pred = refit.point_predict(rows);
    for (std::size_t i = 0; i < n; ++i) dist.at(i, static_cast<std::size_t>(k)) = pred[i];
  }
  return dist;
}

nlohmann::ordered_json BartModel::to_json() const {
  nlohmann::ordered_json out;
  out["format"] = "predsens_model";
  out["version"] = 1;
  out["kind"] = "bart_lite";
  out["config"] = {{"trees", config_.effective_trees()},
                   {"beta", config_.bart.beta},
                   {"eta", config_.bart.eta},
                   {"node_scale_q", config_.bart.node_scale_q},
                   {"sigma_df", config_.bart.sigma_df},
                   {"sigma_quantile", config_.bart.sigma_quantile},
                   {"burn_in", config_.bart.burn_in},
                   {"draws", config_.bart.draws},
                   {"seed", config_.seed}};
  out["names"] = x_.names;
  out["importance"] = importance_;
  out["training"] = {{"rmse", summary_.rmse}, {"r2", summary_.r2}};
  out["y_mean"] = y_mean_;
  out["sigma_mu2"] = sigma_mu2_;
  out["lambda"] = lambda_;
  out["sigma2_chain"] = sigma2_chain_;
  nlohmann::ordered_json draws = nlohmann::ordered_json::array();
  for (const auto& ensemble : ensembles_) {
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const Tree& tree : ensemble) {
      nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
      for (const TreeNode& nd : tree.nodes) {
        nodes.push_back({nd.var, nd.threshold, nd.left, nd.right, nd.value});
      }
      trees.push_back(std::move(nodes));
    }
    draws.push_back(std::move(trees));
  }
  out["draws"] = std::move(draws);
  out["data"] = {{"x", x_.cols}, {"y", y_}};
  return out;
}

std::unique_ptr<BartModel> BartModel::from_json(const nlohmann::ordered_json& blob) {
  std::unique_ptr<BartModel> model(new BartModel());
  const auto& cfg = blob.at("config");
  model->config_.kind = RegressorKind::bart_lite;
  model->config_.trees = cfg.at("trees").get<int>();
  model->config_.bart.beta = cfg.at("beta").get<double>();
  model->config_.bart.eta = cfg.at("eta").get<double>();
  model->config_.bart.node_scale_q = cfg.at("node_scale_q").get<double>();
  model->config_.bart.sigma_df = cfg.at("sigma_df").get<double>();
  model->config_.bart.sigma_quantile = cfg.at("sigma_quantile").get<double>();
  model->config_.bart.burn_in = cfg.at("burn_in").get<int>();
  model->config_.bart.draws = cfg.at("draws").get<int>();
  model->config_.seed = cfg.at("seed").get<std::uint64_t>();
  model->x_.names = blob.at("names").get<std::vector<std::string>>();
  model->x_.cols = blob.at("data").at("x").get<std::vector<std::vector<double>>>();
  model->y_ = blob.at("data").at("y").get<std::vector<double>>();
  model->importance_ = blob.at("importance").get<std::vector<double>>();
  model->summary_.rmse = blob.at("training").at("rmse").get<double>();
  model->summary_.r2 = blob.at("training").at("r2").get<double>();
  model->y_mean_ = blob.at("y_mean").get<double>();
  model->sigma_mu2_ = blob.at("sigma_mu2").get<double>();
  model->lambda_ = blob.at("lambda").get<double>();
  model->sigma2_chain_ = blob.at("sigma2_chain").get<std::vector<double>>();
  for (const auto& jd : blob.at("draws")) {
    std::vector<Tree> ensemble;
    for (const auto& jt : jd) {
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
      ensemble.push_back(std::move(tree));
    }
    model->ensembles_.push_back(std::move(ensemble));
  }
  return model;
}

}  // namespace predsens
