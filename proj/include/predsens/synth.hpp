#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "predsens/dataset.hpp"

namespace predsens {

// Requested correlation structure for one synthetic predictor. rho_outcome is
// the target Pearson correlation with the outcome; rho_predictors holds one
// target per (stacked) predictor, defaulting to all zeros when empty.
struct CorrelationSpec {
  double rho_outcome = 0.0;
  std::vector<double> rho_predictors;
  double tikhonov_alpha = 0.0;
  std::uint64_t seed = 1;
};

// Outcome, synthetic slot and predictors side by side. Column 0 is the
// outcome, column 1 the synthetic slot, columns 2.. the predictors; every
// consumer reads the synthetic column from position 1.
struct StackedMatrix {
  Eigen::MatrixXd data;
  std::vector<std::string> names;

  Eigen::Index n() const { return data.rows(); }
  Eigen::Index width() const { return data.cols(); }
};

// iid standard normal draws, reproducible across platforms for a given seed.
std::vector<double> draw_raw(std::size_t n, std::uint64_t seed);

// Empirical correlation matrix of the stack columns (they are expected to be
// centered and scaled, so this is Z^T Z / (N-1)).
Eigen::MatrixXd stack_correlation(const StackedMatrix& s);

// Decorrelates the columns: the output has empirical correlation identity.
// Requires centered and scaled input. Internally the factorization orders the
// synthetic slot last, so whiten followed by recolor leaves the outcome and
// predictor columns numerically untouched and pushes every adjustment into
// the synthetic slot; the targets are then met against the original columns
// exactly rather than approximately.
StackedMatrix whiten(const StackedMatrix& s);

// Target correlation matrix: k_hat with row/column 1 overwritten by the
// spec's targets.
Eigen::MatrixXd build_target(const Eigen::MatrixXd& k_hat, const CorrelationSpec& spec);

// Imposes the target correlation matrix on a whitened stack. shift_used
// receives the Tikhonov shift the factorization needed (0 in the regular
// full-rank case). Throws NumericError when the target is not positive
// definite after the full escalation schedule.
StackedMatrix recolor_to(const StackedMatrix& s_white, const Eigen::MatrixXd& target,
                         double initial_shift, double* shift_used);
StackedMatrix recolor(const StackedMatrix& s_white, const CorrelationSpec& spec,
                      const MomentSummary& k_hat);

struct SynthResult {
  std::vector<double> r;  // one value per study row, in raw-draw scale
  double achieved_rho_outcome = 0.0;
  std::vector<double> achieved_rho_predictors;
  double tolerance = 0.0;  // max(0.02, 3/sqrt(N)) check threshold
  double shift_used = 0.0;
  CorrelationSpec spec;
  std::vector<std::string> warnings;
};

// Full pipeline on the study rows of d: draw raw column, stack with outcome
// and predictors, standardize, whiten, recolor to the target, rescale back,
// extract the synthetic column. Achieved correlations are recomputed against
// the original outcome and predictors and checked against the tolerance;
// violations are reported as warnings, not errors.
SynthResult generate_synthetic(const Dataset& d, const CorrelationSpec& spec);

// Independent construction used to cross-check generate_synthetic: projects
// the outcome and a fresh noise vector onto the orthogonal complement of
// span{1, X} and combines the two residual directions so that the correlation
// with the outcome equals the target exactly and the correlation with every
// predictor is exactly zero. Only supports zero cross-targets. Kept separate
// from generate_synthetic on purpose; the two routes validate each other.
SynthResult generate_exact_oracle(const Dataset& d, const CorrelationSpec& spec);

}  // namespace predsens
