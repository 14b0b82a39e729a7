#include <cmath>
#include <vector>

#include "doctest.h"
#include "predsens/errors.hpp"
#include "predsens/rng.hpp"
#include "predsens/stats.hpp"

using namespace predsens;

TEST_CASE("mean, variance and sd use the N-1 denominator") {
  const std::vector<double> v{0.0, 2.0};
  CHECK(mean(v) == doctest::Approx(1.0));
  CHECK(variance(v) == doctest::Approx(2.0));
  CHECK(stddev(v) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(variance({1.0}), ValidationError);
}

TEST_CASE("pearson matches the textbook sum formula") {
  const std::vector<double> x{1.0, 2.0, 3.0};
  const std::vector<double> y{2.0, 4.0, 6.5};
  // Oracle: direct evaluation of sum((x-mx)(y-my)) / sqrt(sum dx^2 sum dy^2).
  // For this triple the exact value is 13.5 / sqrt(183).
  const double expected = 13.5 / std::sqrt(183.0);
  CHECK(pearson(x, y) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(pearson(x, y) == doctest::Approx(0.9979484).epsilon(1e-6));

  // Scale and shift invariance.
  std::vector<double> y2(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) y2[i] = 3.0 * y[i] - 7.0;
  CHECK(pearson(x, y2) == doctest::Approx(pearson(x, y)).epsilon(1e-12));

  // Zero variance side reports 0 rather than NaN.
  CHECK(pearson(x, {1.0, 1.0, 1.0}) == 0.0);
}

TEST_CASE("median and mad hand values") {
  CHECK(median({3.0, 1.0, 2.0}) == doctest::Approx(2.0));
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == doctest::Approx(2.5));
  // Deviations from median 3 are {2,1,0,1,97}; their median is 1.
  CHECK(mad({1.0, 2.0, 3.0, 4.0, 100.0}) == doctest::Approx(1.0));
}

TEST_CASE("quantile interpolates between order statistics") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  CHECK(quantile(v, 0.0) == doctest::Approx(1.0));
  CHECK(quantile(v, 1.0) == doctest::Approx(4.0));
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
  CHECK_THROWS_AS(quantile(v, 1.5), ValidationError);
}

TEST_CASE("central interval brackets the requested mass") {
  std::vector<double> draws;
  for (int i = 0; i <= 100; ++i) draws.push_back(static_cast<double>(i));
  const Interval iv = central_interval(draws, 0.9);
  CHECK(iv.lo == doctest::Approx(5.0));
  CHECK(iv.hi == doctest::Approx(95.0));
  CHECK(iv.contains(50.0));
  CHECK_FALSE(iv.contains(99.0));
  CHECK(iv.disjoint_from(Interval{96.0, 99.0}));
  CHECK_FALSE(iv.disjoint_from(Interval{90.0, 99.0}));
}

TEST_CASE("normal cdf and quantile") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(-2.0) == doctest::Approx(0.02275013194817921).epsilon(1e-12));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-9));
  CHECK(normal_quantile(0.995) == doctest::Approx(2.5758293035489004).epsilon(1e-9));
  // Round trip across the domain, including the far tails.
  for (double p : {1e-9, 1e-4, 0.025, 0.3, 0.5, 0.77, 0.975, 0.9999, 1.0 - 1e-9}) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
  }
  CHECK_THROWS_AS(normal_quantile(0.0), ValidationError);
}

TEST_CASE("incomplete gamma against closed forms") {
  // P(1, x) = 1 - exp(-x) and P(2, x) = 1 - exp(-x)(1 + x) exactly.
  for (double x : {0.1, 0.5, 1.0, 2.0, 5.0, 20.0}) {
    CHECK(gamma_p(1.0, x) == doctest::Approx(1.0 - std::exp(-x)).epsilon(1e-12));
    CHECK(gamma_p(2.0, x) == doctest::Approx(1.0 - std::exp(-x) * (1.0 + x)).epsilon(1e-12));
  }
  // chi^2 with 2 degrees of freedom is Exp(1/2): quantile has a closed form.
  for (double p : {0.05, 0.1, 0.5, 0.9, 0.99}) {
    CHECK(chi_squared_quantile(p, 2.0) ==
          doctest::Approx(-2.0 * std::log(1.0 - p)).epsilon(1e-9));
  }
  // Table checks and the quantile/cdf round trip for other dfs.
  CHECK(chi_squared_quantile(0.1, 3.0) == doctest::Approx(0.584374).epsilon(1e-4));
  CHECK(chi_squared_quantile(0.95, 10.0) == doctest::Approx(18.3070).epsilon(1e-4));
  for (double df : {1.0, 3.0, 10.0, 50.0}) {
    for (double p : {0.01, 0.5, 0.975}) {
      CHECK(chi_squared_cdf(chi_squared_quantile(p, df), df) == doctest::Approx(p).epsilon(1e-9));
    }
  }
}

TEST_CASE("two proportion z hand value") {
  CHECK(two_proportion_z(30, 50, 20, 50) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(two_proportion_z(0, 50, 0, 50) == 0.0);
}

TEST_CASE("auc from mid-ranks") {
  CHECK(auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == doctest::Approx(0.75));
  CHECK(auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == doctest::Approx(1.0));
  // All-tied scores carry no information.
  CHECK(auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), ValidationError);
}

TEST_CASE("geweke z is small for iid noise and large for a drifting chain") {
  Rng rng(7);
  std::vector<double> flat(2000);
  for (double& v : flat) v = rng.normal();
  CHECK(std::abs(geweke_z(flat)) < 3.0);

  std::vector<double> drift(2000);
  for (std::size_t i = 0; i < drift.size(); ++i) {
    drift[i] = 0.005 * static_cast<double>(i) + rng.normal();
  }
  CHECK(std::abs(geweke_z(drift)) > 3.0);
}

TEST_CASE("rng streams are reproducible and roughly standard normal") {
  const int n = 100000;
  Rng a(123), b(123), c(456);
  std::vector<double> va(n), vb(n), vc(n);
  for (int i = 0; i < n; ++i) {
    va[i] = a.normal();
    vb[i] = b.normal();
    vc[i] = c.normal();
  }
  CHECK(va == vb);
  CHECK(std::abs(mean(va)) <= 0.02);
  CHECK(std::abs(stddev(va) - 1.0) <= 0.02);
  CHECK(std::abs(pearson(va, vc)) <= 0.02);
}

TEST_CASE("gamma sampler has the right first two moments") {
  Rng rng(99);
  const double shape = 4.0;
  std::vector<double> v(50000);
  for (double& x : v) x = rng.gamma(shape);
  CHECK(mean(v) == doctest::Approx(shape).epsilon(0.02));
  CHECK(variance(v) == doctest::Approx(shape).epsilon(0.06));
}
