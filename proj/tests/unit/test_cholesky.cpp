#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "predsens/cholesky.hpp"
#include "predsens/errors.hpp"
#include "predsens/rng.hpp"

using namespace predsens;

TEST_CASE("cholesky of a 2x2 correlation matrix, by hand") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 0.5, 0.5, 1.0;
  const CholeskyResult r = cholesky_psd(m);
  CHECK(r.shift == 0.0);
  // L = [[1, 0], [0.5, sqrt(0.75)]]; sqrt(0.75) = 0.86602540378443865.
  CHECK(r.factor(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.factor(0, 1) == 0.0);
  CHECK(r.factor(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.factor(1, 1) == doctest::Approx(0.86602540378443865).epsilon(1e-12));
}

TEST_CASE("factor reproduces a random positive definite matrix") {
  Rng rng(11);
  const int n = 8;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  }
  const Eigen::MatrixXd m = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
  const CholeskyResult r = cholesky_psd(m);
  CHECK(r.shift == 0.0);
  const double err = (r.factor * r.factor.transpose() - m).cwiseAbs().maxCoeff();
  CHECK(err <= 1e-12 * m.cwiseAbs().maxCoeff());
  // The factor is genuinely lower triangular.
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) CHECK(r.factor(i, j) == 0.0);
  }
}

TEST_CASE("rank deficient matrix escalates to the smallest working shift") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 1.0, 1.0, 1.0;
  const CholeskyResult r = cholesky_psd(m);
  CHECK(r.shift == 1e-10);
  const Eigen::MatrixXd shifted = m + r.shift * Eigen::MatrixXd::Identity(2, 2);
  const double err = (r.factor * r.factor.transpose() - shifted).cwiseAbs().maxCoeff();
  CHECK(err <= 1e-12);
}

TEST_CASE("caller-provided shift is the starting point of the escalation") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 1.0, 1.0, 1.0;
  const CholeskyResult r = cholesky_psd(m, 1e-6);
  CHECK(r.shift == 1e-6);
}

TEST_CASE("indefinite matrix exhausts the schedule and names the minor") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  try {
    cholesky_psd(m);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("order 2") != std::string::npos);
  }
}

TEST_CASE("input validation") {
  Eigen::MatrixXd rect(2, 3);
  rect.setZero();
  CHECK_THROWS_AS(cholesky_psd(rect), ValidationError);

  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.2, 1.0;
  CHECK_THROWS_AS(cholesky_psd(asym), ValidationError);

  Eigen::MatrixXd ok(1, 1);
  ok << 4.0;
  CHECK_THROWS_AS(cholesky_psd(ok, -1.0), ValidationError);
  CHECK(cholesky_psd(ok).factor(0, 0) == doctest::Approx(2.0));
}
