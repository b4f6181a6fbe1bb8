#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "medfx/lasso.hpp"

using namespace medfx;
using medfx::testing::kkt_ok;
using medfx::testing::lasso_objective;
using medfx::testing::random_matrix;

TEST_CASE("lambda = 0 on a single column recovers OLS") {
  Rng rng(1);
  Eigen::MatrixXd x = random_matrix(rng, 200, 1);
  x.col(0).array() -= x.col(0).mean();
  x.col(0) /= std::sqrt(x.col(0).squaredNorm() / 200.0);
  Eigen::VectorXd y = 2.0 * x.col(0);
  LassoFit fit = lasso_fit(x, y, 0.0);
  CHECK(std::abs(fit.coef(0) - 2.0) < 1e-6);
  CHECK(std::abs(fit.intercept) < 1e-10);
}

TEST_CASE("lambda at or above lambda_max kills every coefficient exactly") {
  Rng rng(2);
  Eigen::MatrixXd x = random_matrix(rng, 60, 8);
  Eigen::VectorXd y = x.col(0) + random_matrix(rng, 60, 1).col(0);
  double lmax = lasso_lambda_max(x, y);
  for (double lam : {lmax, 1.5 * lmax}) {
    LassoFit fit = lasso_fit(x, y, lam);
    CHECK(fit.coef.isZero(0.0));
    CHECK(fit.active_set.empty());
  }
  LassoFit below = lasso_fit(x, y, 0.95 * lmax);
  CHECK_FALSE(below.active_set.empty());
}

TEST_CASE("orthonormal design matches the soft-threshold closed form") {
  // 5x3 with centered, orthogonal, unit-variance columns: X'X = n I
  Eigen::MatrixXd raw(5, 3);
  raw << 1.3, 0.2, -0.5, -0.7, 1.1, 0.4, 0.2, -0.9, 1.5, -1.1, -0.6, -1.2, 0.3, 0.2, -0.2;
  // Gram-Schmidt on centered columns
  Eigen::MatrixXd x = raw;
  for (int j = 0; j < 3; ++j) {
    x.col(j).array() -= x.col(j).mean();
    for (int k = 0; k < j; ++k) x.col(j) -= x.col(k).dot(x.col(j)) * x.col(k);
    x.col(j) /= x.col(j).norm();
  }
  x *= std::sqrt(5.0);  // columns now have squared norm n
  Eigen::VectorXd y(5);
  y << 1.8, -0.3, 0.9, -1.4, 0.1;

  for (double lam : {0.0, 0.05, 0.2, 0.6}) {
    LassoFit fit = lasso_fit(x, y, lam);
    for (int j = 0; j < 3; ++j) {
      double ols = x.col(j).dot((y.array() - y.mean()).matrix()) / 5.0;
      double expect = ols > lam ? ols - lam : (ols < -lam ? ols + lam : 0.0);
      CHECK(std::abs(fit.coef(j) - expect) < 1e-8);
    }
  }
}

TEST_CASE("KKT conditions hold on random problems") {
  Rng rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    int n = 40 + static_cast<int>(rng.below(80));
    int d = 5 + static_cast<int>(rng.below(30));
    Eigen::MatrixXd x = random_matrix(rng, n, d, 1.0 + rng.uniform());
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
    for (int k = 0; k < 3; ++k) beta(static_cast<int>(rng.below(static_cast<uint64_t>(d)))) = rng.uniform(-2, 2);
    Eigen::VectorXd y = x * beta + 0.5 * random_matrix(rng, n, 1).col(0);
    double lam = rng.uniform(0.01, 0.5) * lasso_lambda_max(x, y);
    LassoFit fit = lasso_fit(x, y, lam);
    REQUIRE(fit.converged);
    CHECK(kkt_ok(fit, x, y, 1e-5));
  }
}

TEST_CASE("objective beats the zero vector and restricted OLS") {
  Rng rng(4);
  Eigen::MatrixXd x = random_matrix(rng, 80, 10);
  Eigen::VectorXd y = x.col(1) - 2.0 * x.col(4) + 0.3 * random_matrix(rng, 80, 1).col(0);
  double lam = 0.05;
  LassoFit fit = lasso_fit(x, y, lam);
  double obj = lasso_objective(fit, x, y, lam);

  LassoFit zero;
  zero.coef = Eigen::VectorXd::Zero(10);
  zero.intercept = y.mean();
  CHECK(obj <= lasso_objective(zero, x, y, lam) + 1e-12);

  std::vector<int> all(10);
  std::iota(all.begin(), all.end(), 0);
  LassoFit ols = ols_refit(x, y, all);
  CHECK(obj <= lasso_objective(ols, x, y, lam) + 1e-12);
}

TEST_CASE("identical inputs give bit-identical fits") {
  Rng rng(5);
  Eigen::MatrixXd x = random_matrix(rng, 50, 12);
  Eigen::VectorXd y = x.col(0) + random_matrix(rng, 50, 1).col(0);
  LassoFit a = lasso_fit(x, y, 0.03), b = lasso_fit(x, y, 0.03);
  CHECK(a.coef == b.coef);
  CHECK(a.intercept == b.intercept);
}

TEST_CASE("warm-started path and cold solve agree on the objective") {
  Rng rng(6);
  Eigen::MatrixXd x = random_matrix(rng, 120, 20);
  Eigen::VectorXd y = 1.5 * x.col(3) - x.col(7) + 0.4 * random_matrix(rng, 120, 1).col(0);
  auto [cv, warm] = lasso_cv(x, y, 5, 40, {});
  LassoFit cold = lasso_fit(x, y, cv.lambda_1se);
  double ow = lasso_objective(warm, x, y, cv.lambda_1se);
  double oc = lasso_objective(cold, x, y, cv.lambda_1se);
  CHECK(std::abs(ow - oc) <= 1e-8 * std::max(1.0, std::abs(oc)));
}

TEST_CASE("cv selections: lambda_1se >= lambda_min and the 1se rule holds") {
  Rng rng(7);
  Eigen::MatrixXd x = random_matrix(rng, 150, 25);
  Eigen::VectorXd y = x.col(2) + 0.8 * random_matrix(rng, 150, 1).col(0);
  auto [cv, fit] = lasso_cv(x, y, 5, 50, {});
  CHECK(cv.lambda_1se >= cv.lambda_min);
  Eigen::Index imin;
  cv.cv_mean.minCoeff(&imin);
  double thresh = cv.cv_mean(imin) + cv.cv_se(imin);
  // lambda_1se is the largest grid value under the threshold
  for (Eigen::Index g = 0; g < cv.lambda_grid.size(); ++g) {
    if (cv.lambda_grid(g) > cv.lambda_1se) CHECK(cv.cv_mean(g) > thresh);
    if (cv.lambda_grid(g) == cv.lambda_1se) CHECK(cv.cv_mean(g) <= thresh);
  }
  CHECK(fit.lambda == cv.lambda_1se);
}

TEST_CASE("pure-noise response keeps the 1se model nearly empty") {
  int ok = 0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    Rng rng(100 + static_cast<uint64_t>(t));
    Eigen::MatrixXd x = random_matrix(rng, 200, 50);
    Eigen::VectorXd y = random_matrix(rng, 200, 1).col(0);
    LassoOptions o;
    o.seed = static_cast<uint64_t>(t);
    auto [cv, fit] = lasso_cv(x, y, 5, 40, o);
    if (static_cast<int>(fit.active_set.size()) <= 3) ++ok;
  }
  CHECK(ok >= 45);  // >= 90% of seeds
}

TEST_CASE("a strong single signal survives the 1se rule") {
  int ok = 0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    Rng rng(200 + static_cast<uint64_t>(t));
    Eigen::MatrixXd x = random_matrix(rng, 200, 50);
    Eigen::VectorXd y = 5.0 * x.col(17) + 0.1 * random_matrix(rng, 200, 1).col(0);
    LassoOptions o;
    o.seed = static_cast<uint64_t>(t);
    auto [cv, fit] = lasso_cv(x, y, 5, 40, o);
    bool active = std::find(fit.active_set.begin(), fit.active_set.end(), 17) !=
                  fit.active_set.end();
    if (active) ++ok;
  }
  CHECK(ok >= 45);
}

TEST_CASE("multiresponse with one column reduces to lasso_cv") {
  Rng rng(8);
  Eigen::MatrixXd x = random_matrix(rng, 90, 15);
  Eigen::MatrixXd m = x.col(2) + 0.3 * random_matrix(rng, 90, 1).col(0);
  LassoOptions o;
  o.seed = 77;
  MultiResponseFit mr = multiresponse_fit(x, m, 5, 30, o);
  auto [cv, single] = lasso_cv(x, m.col(0), 5, 30, o);
  CHECK(mr.coef.row(0).transpose() == single.coef);
  CHECK(mr.intercept(0) == single.intercept);
}

TEST_CASE("multiresponse shared-Gram path agrees with per-response CV") {
  Rng rng(9);
  int n = 100, p = 20, q = 5;
  Eigen::MatrixXd x = random_matrix(rng, n, p);
  Eigen::MatrixXd m(n, q);
  for (int k = 0; k < q; ++k)
    m.col(k) = 1.2 * x.col(k) - 0.7 * x.col(k + 4) + 0.3 * random_matrix(rng, n, 1).col(0);
  LassoOptions o;
  o.seed = 31;
  MultiResponseFit mr = multiresponse_fit(x, m, 5, 30, o);
  for (int k = 0; k < q; ++k) {
    auto [cv, single] = lasso_cv(x, m.col(k), 5, 30, o);
    CHECK(single.lambda == doctest::Approx(mr.fits[static_cast<size_t>(k)].lambda).epsilon(1e-10));
    CHECK((mr.coef.row(k).transpose() - single.coef).lpNorm<Eigen::Infinity>() < 1e-7);
  }
}

TEST_CASE("multiresponse support recovery on a sparse mediator model") {
  int ok = 0, total = 0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    Rng rng(300 + static_cast<uint64_t>(t));
    int n = 400, p = 50, q = 3, s = 2;
    Eigen::MatrixXd x = random_matrix(rng, n, p);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(q, p);
    for (int k = 0; k < q; ++k) {
      auto pos = rng.choose(p, s);
      for (int j : pos) b(k, j) = rng.uniform(0.5, 1.0);
    }
    Eigen::MatrixXd m = x * b.transpose() + 0.1 * random_matrix(rng, n, q);
    LassoOptions o;
    o.seed = static_cast<uint64_t>(t);
    MultiResponseFit mr = multiresponse_fit(x, m, 5, 30, o);
    for (int k = 0; k < q; ++k) {
      ++total;
      bool covered = true;
      for (int j = 0; j < p; ++j)
        if (b(k, j) != 0.0 && mr.coef(k, j) == 0.0) covered = false;
      if (covered) ++ok;
    }
  }
  CHECK(ok * 10 >= total * 8);  // support recovered in >= 80% of rows
}

TEST_CASE("permuting mediator columns permutes the rows of B identically") {
  Rng rng(10);
  int n = 80, p = 12, q = 4;
  Eigen::MatrixXd x = random_matrix(rng, n, p);
  Eigen::MatrixXd m = random_matrix(rng, n, q);
  m.col(0) += 2.0 * x.col(1);
  m.col(3) -= 1.5 * x.col(2);
  LassoOptions o;
  o.seed = 5;
  MultiResponseFit a = multiresponse_fit(x, m, 5, 25, o);
  Eigen::MatrixXd mp(n, q);
  std::vector<int> perm = {2, 0, 3, 1};
  for (int k = 0; k < q; ++k) mp.col(k) = m.col(perm[static_cast<size_t>(k)]);
  MultiResponseFit b = multiresponse_fit(x, mp, 5, 25, o);
  for (int k = 0; k < q; ++k)
    CHECK(b.coef.row(k) == a.coef.row(perm[static_cast<size_t>(k)]));
}

TEST_CASE("hard_threshold zeroes small coefficients") {
  Rng rng(11);
  Eigen::MatrixXd x = random_matrix(rng, 40, 3);
  Eigen::VectorXd y = random_matrix(rng, 40, 1).col(0);
  LassoFit fit;
  fit.coef = Eigen::VectorXd(3);
  fit.coef << 0.3, -0.05, 1.2;
  fit.intercept = 0.1;
  fit.lambda = 0.0;

  LassoFit t0 = hard_threshold(fit, 0.0, x, y);
  CHECK(t0.coef == fit.coef);
  LassoFit tinf = hard_threshold(fit, std::numeric_limits<double>::infinity(), x, y);
  CHECK(tinf.coef.isZero(0.0));
  LassoFit t = hard_threshold(fit, 0.1, x, y);
  CHECK(t.coef(0) == 0.3);
  CHECK(t.coef(1) == 0.0);
  CHECK(t.coef(2) == 1.2);
  CHECK(t.active_set == std::vector<int>{0, 2});
  CHECK(std::abs(t.residuals.mean()) < 1e-12);  // intercept re-centered
}

TEST_CASE("zero-variance columns are an explicit error under standardization") {
  Rng rng(12);
  Eigen::MatrixXd x = random_matrix(rng, 30, 4);
  x.col(2).setConstant(3.0);
  Eigen::VectorXd y = random_matrix(rng, 30, 1).col(0);
  CHECK_THROWS_AS(lasso_fit(x, y, 0.1), DegenerateColumn);
  LassoOptions o;
  o.standardize = false;
  CHECK_NOTHROW(lasso_fit(x, y, 0.1, o));
}

TEST_CASE("exhausted pass budget reports NotConverged with a partial fit") {
  Rng rng(13);
  Eigen::MatrixXd base = random_matrix(rng, 60, 1);
  Eigen::MatrixXd x(60, 6);
  for (int j = 0; j < 6; ++j) x.col(j) = base.col(0) + 0.01 * random_matrix(rng, 60, 1).col(0);
  Eigen::VectorXd y = x.rowwise().sum() + 0.1 * random_matrix(rng, 60, 1).col(0);
  LassoOptions o;
  o.max_passes = 2;
  LassoFit fit = lasso_fit(x, y, 1e-6, o);
  CHECK_FALSE(fit.converged);
  CHECK(fit.coef.size() == 6);
}
