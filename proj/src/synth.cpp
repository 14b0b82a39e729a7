#include "predsens/synth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "predsens/cholesky.hpp"
#include "predsens/errors.hpp"
#include "predsens/rng.hpp"
#include "predsens/stats.hpp"

namespace predsens {

namespace {

constexpr int kSlotColumn = 1;

// Permutation that moves the synthetic slot behind the predictors. Factoring
// the correlation matrices in this order makes the leading block of the
// target factor identical to the leading block of the empirical factor (the
// two matrices differ only in the synthetic row/column), so whiten + recolor
// is the identity on the outcome and predictor columns.
std::vector<Eigen::Index> slot_last_order(Eigen::Index width) {
  std::vector<Eigen::Index> order;
  order.reserve(width);
  for (Eigen::Index c = 0; c < width; ++c) {
    if (c != kSlotColumn) order.push_back(c);
  }
  order.push_back(kSlotColumn);
  return order;
}

Eigen::MatrixXd permute_columns(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& order) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.col(c) = m.col(order[c]);
  return out;
}

Eigen::MatrixXd permute_symmetric(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& order) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = m(order[i], order[j]);
  }
  return out;
}

Eigen::MatrixXd unpermute_columns(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& order) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.col(order[c]) = m.col(c);
  return out;
}

void check_centered_scaled(const StackedMatrix& s, const char* op) {
  const double n = static_cast<double>(s.n());
  if (s.n() < 3) throw ValidationError(std::string(op) + ": need at least 3 rows");
  for (Eigen::Index c = 0; c < s.width(); ++c) {
    const double m = s.data.col(c).mean();
    const double sd = std::sqrt(s.data.col(c).squaredNorm() / (n - 1.0) -
                                m * m * n / (n - 1.0));
    if (std::abs(m) > 1e-8 || std::abs(sd - 1.0) > 1e-6) {
      throw ValidationError(std::string(op) + ": column " + std::to_string(c) +
                            " is not centered and scaled");
    }
  }
}

std::string format_rho(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::vector<double> draw_raw(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (double& v : out) v = rng.normal();
  return out;
}

Eigen::MatrixXd stack_correlation(const StackedMatrix& s) {
  const double n = static_cast<double>(s.n());
  return (s.data.transpose() * s.data) / (n - 1.0);
}

StackedMatrix whiten(const StackedMatrix& s) {
  check_centered_scaled(s, "whiten");
  const auto order = slot_last_order(s.width());
  const Eigen::MatrixXd z = permute_columns(s.data, order);
  const double n = static_cast<double>(s.n());
  const Eigen::MatrixXd k_hat = (z.transpose() * z) / (n - 1.0);
  const CholeskyResult chol = cholesky_psd(k_hat);
  // W = Z L^{-T}, done as a triangular solve on the transpose.
  Eigen::MatrixXd wt = chol.factor.triangularView<Eigen::Lower>().solve(z.transpose());
  StackedMatrix out;
  out.names = s.names;
  out.data = unpermute_columns(wt.transpose(), order);
  return out;
}

Eigen::MatrixXd build_target(const Eigen::MatrixXd& k_hat, const CorrelationSpec& spec) {
  if (k_hat.rows() != k_hat.cols()) throw ValidationError("build_target: k_hat not square");
  const Eigen::Index width = k_hat.rows();
  if (width < 2) throw ValidationError("build_target: stack too narrow");
  if (std::abs(spec.rho_outcome) >= 1.0) {
    throw ValidationError("build_target: |rho_outcome| must be < 1");
  }
  const std::size_t p = static_cast<std::size_t>(width - 2);
  if (!spec.rho_predictors.empty() && spec.rho_predictors.size() != p) {
    throw ValidationError("build_target: rho_predictors has " +
                          std::to_string(spec.rho_predictors.size()) + " entries, expected " +
                          std::to_string(p));
  }
  Eigen::MatrixXd k = k_hat;
  k(0, kSlotColumn) = k(kSlotColumn, 0) = spec.rho_outcome;
  for (std::size_t j = 0; j < p; ++j) {
    const double rho = spec.rho_predictors.empty() ? 0.0 : spec.rho_predictors[j];
    if (std::abs(rho) >= 1.0) throw ValidationError("build_target: |rho_predictors| must be < 1");
    k(kSlotColumn, static_cast<Eigen::Index>(j) + 2) = rho;
    k(static_cast<Eigen::Index>(j) + 2, kSlotColumn) = rho;
  }
  k(kSlotColumn, kSlotColumn) = 1.0;
  return k;
}

StackedMatrix recolor_to(const StackedMatrix& s_white, const Eigen::MatrixXd& target,
                         double initial_shift, double* shift_used) {
  if (target.rows() != s_white.width()) {
    throw ValidationError("recolor_to: target size does not match stack width");
  }
  {
    // The input must actually be white, otherwise the imposed structure is
    // garbage; tolerance is loose because callers standardize empirically.
    const Eigen::MatrixXd k = stack_correlation(s_white);
    const double off = (k - Eigen::MatrixXd::Identity(k.rows(), k.cols())).cwiseAbs().maxCoeff();
    if (off > 1e-6) {
      throw ValidationError("recolor_to: input is not whitened (max deviation " +
                            std::to_string(off) + ")");
    }
  }
  const auto order = slot_last_order(s_white.width());
  const Eigen::MatrixXd w = permute_columns(s_white.data, order);
  const Eigen::MatrixXd k_perm = permute_symmetric(target, order);
  CholeskyResult chol;
  try {
    chol = cholesky_psd(k_perm, initial_shift);
  } catch (const NumericError& e) {
    std::ostringstream os;
    os << "recolor_to: target correlation matrix is not positive definite"
       << " (rho_outcome part " << target(0, kSlotColumn) << ", cross targets";
    for (Eigen::Index c = 2; c < target.cols(); ++c) os << " " << target(kSlotColumn, c);
    os << "); " << e.what();
    throw NumericError(os.str());
  }
  if (shift_used != nullptr) *shift_used = chol.shift;
  StackedMatrix out;
  out.names = s_white.names;
  out.data = unpermute_columns(w * chol.factor.transpose(), order);
  return out;
}

StackedMatrix recolor(const StackedMatrix& s_white, const CorrelationSpec& spec,
                      const MomentSummary& k_hat) {
  return recolor_to(s_white, build_target(k_hat.correlation, spec), spec.tikhonov_alpha, nullptr);
}

namespace {

struct StudyData {
  std::vector<std::size_t> rows;
  std::vector<double> y;
  std::vector<const Column*> predictors;  // all predictors, stored order
  std::vector<bool> usable;               // non-degenerate on study rows
};

StudyData collect_study(const Dataset& d, const CorrelationSpec& spec,
                        std::vector<std::string>* warnings) {
  StudyData sd;
  sd.rows = d.study_rows();
  const std::size_t n = sd.rows.size();
  if (n < 10) throw ValidationError("generate_synthetic: need at least 10 study rows");
  if (d.n_predictors() == 0) throw ValidationError("generate_synthetic: need at least 1 predictor");
  if (!spec.rho_predictors.empty() && spec.rho_predictors.size() != d.n_predictors()) {
    throw ValidationError("correlation spec has " + std::to_string(spec.rho_predictors.size()) +
                          " predictor targets, dataset has " + std::to_string(d.n_predictors()));
  }
  const Column& yc = d.outcome();
  sd.y.reserve(n);
  for (std::size_t r : sd.rows) {
    if (yc.is_missing(r)) throw ValidationError("generate_synthetic: missing outcome on study row");
    sd.y.push_back(yc.values[r]);
  }
  if (stddev(sd.y) <= 0.0) throw ValidationError("generate_synthetic: outcome has zero variance");

  std::size_t pi = 0;
  for (int ci : d.predictor_indexes()) {
    const Column& col = d.columns[static_cast<std::size_t>(ci)];
    std::vector<double> vals;
    vals.reserve(n);
    for (std::size_t r : sd.rows) {
      if (col.is_missing(r)) {
        throw ValidationError("generate_synthetic: column '" + col.name +
                              "' has missing study cells; run imputation first");
      }
      vals.push_back(col.values[r]);
    }
    const bool usable = stddev(vals) > 0.0;
    if (!usable) {
      const double want = spec.rho_predictors.empty() ? 0.0 : spec.rho_predictors[pi];
      std::string msg = "predictor '" + col.name + "' has zero variance and is excluded";
      if (want != 0.0) msg += "; its nonzero target correlation cannot be honored";
      warnings->push_back(msg);
    }
    sd.predictors.push_back(&col);
    sd.usable.push_back(usable);
    ++pi;
  }
  return sd;
}

}  // namespace

SynthResult generate_synthetic(const Dataset& d, const CorrelationSpec& spec) {
  SynthResult result;
  result.spec = spec;
  if (std::abs(spec.rho_outcome) >= 1.0) {
    throw ValidationError("generate_synthetic: |rho_outcome| must be < 1");
  }
  StudyData sd = collect_study(d, spec, &result.warnings);
  const std::size_t n = sd.rows.size();
  const std::size_t p_all = sd.predictors.size();

  std::vector<std::size_t> used;
  for (std::size_t j = 0; j < p_all; ++j) {
    if (sd.usable[j]) used.push_back(j);
  }

  const std::vector<double> raw = draw_raw(n, spec.seed);

  // Stack [y, raw, X_used], each column centered and scaled; remember the
  // moments for the rescale step at the end.
  const Eigen::Index width = static_cast<Eigen::Index>(2 + used.size());
  StackedMatrix stack;
  stack.data.resize(static_cast<Eigen::Index>(n), width);
  stack.names.resize(static_cast<std::size_t>(width));
  std::vector<double> col_mean(static_cast<std::size_t>(width));
  std::vector<double> col_sd(static_cast<std::size_t>(width));

  const auto put_column = [&](Eigen::Index c, const std::string& name,
                              const std::vector<double>& vals) {
    const double m = mean(vals);
    const double s = stddev(vals);
    col_mean[static_cast<std::size_t>(c)] = m;
    col_sd[static_cast<std::size_t>(c)] = s;
    stack.names[static_cast<std::size_t>(c)] = name;
    for (std::size_t i = 0; i < n; ++i) {
      stack.data(static_cast<Eigen::Index>(i), c) = (vals[i] - m) / s;
    }
  };
  put_column(0, d.outcome().name, sd.y);
  put_column(1, "__synthetic__", raw);
  {
    Eigen::Index c = 2;
    for (std::size_t j : used) {
      std::vector<double> vals;
      vals.reserve(n);
      for (std::size_t r : sd.rows) vals.push_back(sd.predictors[j]->values[r]);
      put_column(c, sd.predictors[j]->name, vals);
      ++c;
    }
  }

  CorrelationSpec stack_spec = spec;
  if (!spec.rho_predictors.empty()) {
    stack_spec.rho_predictors.clear();
    for (std::size_t j : used) stack_spec.rho_predictors.push_back(spec.rho_predictors[j]);
  }

  const Eigen::MatrixXd k_hat = stack_correlation(stack);
  const StackedMatrix white = whiten(stack);
  const Eigen::MatrixXd target = build_target(k_hat, stack_spec);
  const StackedMatrix colored =
      recolor_to(white, target, spec.tikhonov_alpha, &result.shift_used);
  if (result.shift_used > 0.0) {
    result.warnings.push_back("target correlation matrix needed a diagonal shift of " +
                              format_rho(result.shift_used) +
                              "; achieved correlations are perturbed accordingly");
  }

  // Rescale the synthetic column back to the raw draw's scale and location.
  result.r.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    result.r[i] = colored.data(static_cast<Eigen::Index>(i), 1) * col_sd[1] + col_mean[1];
  }

  result.tolerance = std::max(0.02, 3.0 / std::sqrt(static_cast<double>(n)));
  result.achieved_rho_outcome = pearson(result.r, sd.y);
  if (std::abs(result.achieved_rho_outcome - spec.rho_outcome) > result.tolerance) {
    result.warnings.push_back("achieved outcome correlation " +
                              format_rho(result.achieved_rho_outcome) + " misses target " +
                              format_rho(spec.rho_outcome) + " beyond tolerance " +
                              format_rho(result.tolerance));
  }
  result.achieved_rho_predictors.assign(p_all, 0.0);
  for (std::size_t j = 0; j < p_all; ++j) {
    if (!sd.usable[j]) continue;
    std::vector<double> vals;
    vals.reserve(n);
    for (std::size_t r : sd.rows) vals.push_back(sd.predictors[j]->values[r]);
    result.achieved_rho_predictors[j] = pearson(result.r, vals);
    const double want = spec.rho_predictors.empty() ? 0.0 : spec.rho_predictors[j];
    if (std::abs(result.achieved_rho_predictors[j] - want) > result.tolerance) {
      result.warnings.push_back("achieved correlation with '" + sd.predictors[j]->name + "' " +
                                format_rho(result.achieved_rho_predictors[j]) +
                                " misses target " + format_rho(want) + " beyond tolerance " +
                                format_rho(result.tolerance));
    }
  }
  return result;
}

SynthResult generate_exact_oracle(const Dataset& d, const CorrelationSpec& spec) {
  SynthResult result;
  result.spec = spec;
  const double rho = spec.rho_outcome;
  if (std::abs(rho) >= 1.0) {
    throw ValidationError("generate_exact_oracle: |rho_outcome| must be < 1");
  }
  for (double v : spec.rho_predictors) {
    if (v != 0.0) {
      throw ValidationError(
          "generate_exact_oracle: only zero predictor cross-targets are supported");
    }
  }
  StudyData sd = collect_study(d, spec, &result.warnings);
  const std::size_t n = sd.rows.size();

  std::vector<std::size_t> used;
  for (std::size_t j = 0; j < sd.usable.size(); ++j) {
    if (sd.usable[j]) used.push_back(j);
  }
  if (n < used.size() + 3) {
    throw ValidationError("generate_exact_oracle: too few rows for the residual construction");
  }

  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(used.size() + 1));
  a.col(0).setOnes();
  for (std::size_t k = 0; k < used.size(); ++k) {
    const Column* col = sd.predictors[used[k]];
    for (std::size_t i = 0; i < n; ++i) {
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k + 1)) = col->values[sd.rows[i]];
    }
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  const auto residualize = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return v - a * qr.solve(v);
  };

  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = sd.y[i];
  const Eigen::VectorXd e_y = residualize(y);
  const double y_center_norm = (y.array() - y.mean()).matrix().norm();
  const double e_norm = e_y.norm();
  if (e_norm <= 1e-10 * y_center_norm) {
    throw NumericError(
        "generate_exact_oracle: outcome lies in the predictor span; no residual direction left");
  }
  // Largest magnitude of correlation with the outcome that any vector
  // orthogonal to the predictors can reach.
  const double reach = e_norm / y_center_norm;
  if (std::abs(rho) >= reach) {
    throw NumericError("generate_exact_oracle: target correlation " + format_rho(rho) +
                       " exceeds the maximum " + format_rho(reach) +
                       " attainable while staying orthogonal to the predictors");
  }

  Eigen::VectorXd u;
  double u_norm = 0.0;
  for (int attempt = 0; attempt < 16; ++attempt) {
    const std::vector<double> noise =
        draw_raw(n, derive_seed(spec.seed, {0x6f7261636cULL, static_cast<std::uint64_t>(attempt)}));
    Eigen::VectorXd w(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) w(static_cast<Eigen::Index>(i)) = noise[i];
    Eigen::VectorXd e_w = residualize(w);
    e_w -= (e_y.dot(e_w) / (e_norm * e_norm)) * e_y;
    u_norm = e_w.norm();
    if (u_norm > 1e-8) {
      u = e_w;
      break;
    }
  }
  if (u_norm <= 1e-8) {
    throw NumericError("generate_exact_oracle: could not find a second residual direction");
  }

  // R = a_coef * e_y_hat + b_coef * u_hat has unit norm; corr(R, y) = a_coef *
  // reach, so a_coef = rho / reach lands exactly on the target.
  const double a_coef = rho / reach;
  const double b_coef = std::sqrt(1.0 - a_coef * a_coef);
  Eigen::VectorXd r_dir = a_coef * (e_y / e_norm) + b_coef * (u / u_norm);
  // Scale to sample sd 1 to match the raw-draw scale of generate_synthetic.
  r_dir *= std::sqrt(static_cast<double>(n - 1));

  result.r.assign(r_dir.data(), r_dir.data() + r_dir.size());
  result.tolerance = std::max(0.02, 3.0 / std::sqrt(static_cast<double>(n)));
  result.achieved_rho_outcome = pearson(result.r, sd.y);
  result.achieved_rho_predictors.assign(sd.predictors.size(), 0.0);
  for (std::size_t j = 0; j < sd.predictors.size(); ++j) {
    if (!sd.usable[j]) continue;
    std::vector<double> vals;
    vals.reserve(n);
    for (std::size_t r : sd.rows) vals.push_back(sd.predictors[j]->values[r]);
    result.achieved_rho_predictors[j] = pearson(result.r, vals);
  }
  return result;
}

}  // namespace predsens
