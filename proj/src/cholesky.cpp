#include "predsens/cholesky.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "predsens/errors.hpp"

namespace predsens {

namespace {

// Returns the factor, or the order (1-based) of the first leading minor whose
// pivot is not positive.
int try_factor(const Eigen::MatrixXd& m, double shift, Eigen::MatrixXd& out) {
  const Eigen::Index n = m.rows();
  double max_diag = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(m(i, i)) + shift);
  const double pivot_floor = 1e-13 * std::max(max_diag, 1.0);

  out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = m(j, j) + shift;
    for (Eigen::Index k = 0; k < j; ++k) d -= out(j, k) * out(j, k);
    if (d <= pivot_floor) return static_cast<int>(j) + 1;
    out(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= out(i, k) * out(j, k);
      out(i, j) = s / out(j, j);
    }
  }
  return 0;
}

}  // namespace

CholeskyResult cholesky_psd(const Eigen::MatrixXd& m, double initial_shift) {
  if (m.rows() != m.cols()) throw ValidationError("cholesky_psd: matrix is not square");
  if (m.rows() == 0) throw ValidationError("cholesky_psd: empty matrix");
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) {
    throw ValidationError("cholesky_psd: matrix is not symmetric (max |m - m^T| = " +
                          std::to_string(asym) + ")");
  }
  if (initial_shift < 0.0) throw ValidationError("cholesky_psd: negative shift");

  static const double kSchedule[] = {0.0, 1e-10, 1e-8, 1e-6, 1e-4};
  std::vector<double> shifts;
  shifts.push_back(initial_shift);
  for (double s : kSchedule) {
    if (s > initial_shift) shifts.push_back(s);
  }

  CholeskyResult result;
  int bad_minor = 0;
  for (double shift : shifts) {
    bad_minor = try_factor(m, shift, result.factor);
    if (bad_minor == 0) {
      result.shift = shift;
      return result;
    }
  }
  throw NumericError("cholesky_psd: leading minor of order " + std::to_string(bad_minor) +
                     " is not positive definite even with diagonal shift " +
                     std::to_string(shifts.back()));
}

}  // namespace predsens
