#pragma once

#include <cstddef>
#include <vector>

namespace predsens {

double mean(const std::vector<double>& v);
// Sample variance / sd with the N-1 denominator.
double variance(const std::vector<double>& v);
double stddev(const std::vector<double>& v);

// Pearson correlation. Returns 0 when either side has zero variance; callers
// that care about the degenerate case check variances themselves.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> v);
// Median absolute deviation, unscaled. Multiply by 1.4826 for a
// normal-consistent spread estimate.
double mad(const std::vector<double>& v);

// Quantile with linear interpolation between order statistics
// (the common "type 7" rule). p in [0, 1].
double quantile(std::vector<double> v, double p);

// Central interval [q((1-level)/2), q(1-(1-level)/2)].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
  bool disjoint_from(const Interval& o) const { return hi < o.lo || o.hi < lo; }
};
Interval central_interval(std::vector<double> draws, double level);

double normal_cdf(double z);
// Inverse standard normal CDF (Acklam's rational approximation, refined with
// one Halley step; relative error well below 1e-12 after refinement).
double normal_quantile(double p);

// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);
double chi_squared_cdf(double x, double df);
// Inverse chi^2 CDF by bisection on chi_squared_cdf.
double chi_squared_quantile(double p, double df);

// Two-proportion z statistic with pooled variance. Returns 0 when the pooled
// proportion is degenerate (0 or 1).
double two_proportion_z(double successes1, double n1, double successes2, double n2);

// Area under the ROC curve for scores with binary labels, computed from the
// rank-sum statistic; ties share rank.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Standard error of the mean of a (possibly autocorrelated) sequence using
// batch means with `batches` batches.
double batch_means_se(const std::vector<double>& v, int batches = 10);

// Geweke-style stationarity diagnostic: z statistic comparing the mean of the
// first `frac` share of the chain against the last `frac` share, with batch
// means standard errors. |z| <= 3 is treated as stationary.
double geweke_z(const std::vector<double>& chain, double frac = 0.25);

}  // namespace predsens
