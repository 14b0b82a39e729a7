#pragma once

#include <Eigen/Dense>

namespace predsens {

struct CholeskyResult {
  Eigen::MatrixXd factor;  // lower triangular L with L * L^T = m + shift * I
  double shift = 0.0;      // diagonal shift that made the factorization succeed
};

// Cholesky factorization with diagonal (Tikhonov) escalation. Starting from
// `initial_shift`, failures escalate through {0, 1e-10, 1e-8, 1e-6, 1e-4};
// if the largest shift still fails, throws NumericError naming the first
// non-positive leading minor. Throws ValidationError for non-square or
// asymmetric input (tolerance 1e-10 on asymmetry).
//
// The factorization is written out by hand instead of calling Eigen's LLT so
// the escalation sees exactly which pivot failed and the factor is bitwise
// reproducible regardless of Eigen's internal blocking.
CholeskyResult cholesky_psd(const Eigen::MatrixXd& m, double initial_shift = 0.0);

}  // namespace predsens
