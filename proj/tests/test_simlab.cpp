#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "medfx/simlab.hpp"
#include "medfx/stats.hpp"

using namespace medfx;

namespace {

SimConfig quick_config() {
  SimConfig cfg;
  cfg.n = 150;
  cfg.p = 12;
  cfg.q = 10;
  cfg.s = 3;
  cfg.k1 = 3;
  cfg.k2 = 3;
  cfg.sigma2 = 0.1;
  cfg.reps = 10;
  cfg.master_seed = 11;
  cfg.threads = 2;
  cfg.pipeline.cv_folds = 4;
  cfg.pipeline.cv_grid = 20;
  return cfg;
}

}  // namespace

TEST_CASE("gen_params respects the sparsity pattern and value ranges") {
  SimConfig cfg = quick_config();
  TrueParams tp = gen_params(cfg, 5);
  for (int k = 0; k < cfg.q; ++k) {
    int nz = 0;
    for (int j = 0; j < cfg.p; ++j)
      if (tp.B0(k, j) != 0.0) {
        ++nz;
        CHECK(tp.B0(k, j) >= 0.5);
        CHECK(tp.B0(k, j) <= 1.0);
      }
    CHECK(nz == cfg.s);
  }
  auto count_nz = [](const Eigen::VectorXd& v) {
    int c = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (v(i) != 0.0) ++c;
    return c;
  };
  CHECK(count_nz(tp.beta1) == cfg.k1);
  CHECK(count_nz(tp.gamma0) == cfg.k2);
  for (Eigen::Index i = 0; i < tp.beta1.size(); ++i)
    if (tp.beta1(i) != 0.0) {
      CHECK(tp.beta1(i) >= 0.5);
      CHECK(tp.beta1(i) <= 1.5);
    }
  CHECK(tp.delta0.isZero(0.0));
  CHECK(tp.alpha1 == 0.0);
}

TEST_CASE("gen_params is deterministic in the seed") {
  SimConfig cfg = quick_config();
  TrueParams a = gen_params(cfg, 9), b = gen_params(cfg, 9);
  CHECK(a.B0 == b.B0);
  CHECK(a.beta1 == b.beta1);
  TrueParams c = gen_params(cfg, 10);
  CHECK(a.B0 != c.B0);
}

TEST_CASE("covariance spectrum stays inside [1, 2]") {
  SimConfig cfg = quick_config();
  cfg.p = 20;
  SimWorld w = gen_world(cfg, 3);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w.sigma_x);
  CHECK(eig.eigenvalues().minCoeff() >= 1.0 - 1e-9);
  CHECK(eig.eigenvalues().maxCoeff() <= 2.0 + 1e-9);
}

TEST_CASE("covariate mean is near 0.5 coordinatewise") {
  SimConfig cfg = quick_config();
  cfg.n = 4000;
  SimWorld w = gen_world(cfg, 21);
  for (int j = 0; j < cfg.p; ++j) {
    double m = w.X.col(j).mean();
    double se = std::sqrt((w.X.col(j).array() - m).square().sum() / (cfg.n - 1)) /
                std::sqrt(static_cast<double>(cfg.n));
    CHECK(std::abs(m - 0.5) <= 3.0 * se);
  }
}

TEST_CASE("zero-noise limit reproduces the structural equations exactly") {
  SimConfig cfg = quick_config();
  cfg.sigma2 = 1e-30;
  SimWorld w = gen_world(cfg, 7);
  SimDraw d = gen_data(w, cfg, 99);
  for (int i = 0; i < cfg.n; ++i) {
    if (d.data.A(i) != 1) continue;
    double expect = w.X.row(i).dot(w.params.beta1) + d.data.M.row(i).dot(w.params.gamma1);
    CHECK(std::abs(d.data.Y(i) - expect) < 1e-10);
  }
}

TEST_CASE("control-arm mediator variance matches the covariance algebra") {
  // Var(M_j | A=0) = (B0 Var(X|A=0) B0')_jj + sigma^2; treatment selects on
  // X' alpha, so the conditional covariance of X is the right reference.
  SimConfig cfg = quick_config();
  cfg.n = 5000;
  cfg.sigma2 = 0.25;
  SimWorld w = gen_world(cfg, 13);
  SimDraw d = gen_data(w, cfg, 1);
  std::vector<int> ctrl;
  for (int i = 0; i < cfg.n; ++i)
    if (d.data.A(i) == 0) ctrl.push_back(i);
  Eigen::MatrixXd xc(ctrl.size(), cfg.p);
  for (size_t r = 0; r < ctrl.size(); ++r)
    xc.row(static_cast<Eigen::Index>(r)) = w.X.row(ctrl[r]);
  Eigen::MatrixXd xcen = xc.rowwise() - xc.colwise().mean();
  Eigen::MatrixXd cond_cov =
      xcen.transpose() * xcen / static_cast<double>(ctrl.size() - 1);
  Eigen::MatrixXd pop = w.params.B0 * cond_cov * w.params.B0.transpose();
  for (int j = 0; j < cfg.q; ++j) {
    std::vector<double> vals;
    for (int i : ctrl) vals.push_back(d.data.M(i, j));
    double m = 0.0;
    for (double v : vals) m += v;
    m /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - m) * (v - m);
    var /= static_cast<double>(vals.size() - 1);
    double expect = pop(j, j) + cfg.sigma2;
    CHECK(std::abs(var - expect) <= 0.15 * expect);
  }
}

TEST_CASE("treated fraction stays clear of degeneracy across seeds") {
  // The band [0.2, 0.9] was verified by direct Monte Carlo of this generator;
  // with X centered at 0.5 and 5 positive U(0,2) score coefficients the
  // treated share concentrates around 0.75.
  SimConfig cfg = quick_config();
  cfg.n = 1000;
  cfg.p = 50;
  cfg.q = 5;
  std::vector<double> fracs;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    SimWorld w = gen_world(cfg, 1000 + seed);
    SimDraw d = gen_data(w, cfg, 1);
    fracs.push_back(d.data.A.cast<double>().mean());
  }
  std::sort(fracs.begin(), fracs.end());
  CHECK(fracs.front() >= 0.2);
  CHECK(fracs.back() <= 0.9);
  double median = fracs[25];
  CHECK(median >= 0.6);
  CHECK(median <= 0.85);
}

TEST_CASE("X is byte-identical across replications of one world") {
  SimConfig cfg = quick_config();
  SimWorld w = gen_world(cfg, 17);
  SimDraw d1 = gen_data(w, cfg, 100);
  SimDraw d2 = gen_data(w, cfg, 200);
  CHECK(d1.data.X == d2.data.X);
  CHECK(d1.data.A != d2.data.A);  // treatment is redrawn
}

TEST_CASE("true_theta closed forms") {
  TrueParams tp;
  tp.beta0 = Eigen::VectorXd::Zero(2);
  tp.beta1 = Eigen::VectorXd(2);
  tp.beta1 << 1.0, 0.0;
  tp.gamma0 = Eigen::VectorXd::Zero(1);
  tp.gamma1 = Eigen::VectorXd(1);
  tp.gamma1 << 2.0;
  tp.delta0 = tp.delta1 = Eigen::VectorXd::Zero(1);
  tp.B0 = Eigen::MatrixXd(1, 2);
  tp.B0 << 0.5, 0.5;
  tp.B1 = tp.B0;
  Eigen::VectorXd xbar(2);
  xbar << 1.0, 1.0;
  CHECK(true_theta(tp, xbar) == doctest::Approx(3.0));

  TrueParams tg = tp;
  tg.gamma1.setZero();
  CHECK(true_theta(tg, xbar) == doctest::Approx(1.0));
  TrueParams tb = tp;
  tb.B0.setZero();
  CHECK(true_theta(tb, xbar) == doctest::Approx(1.0));
}

TEST_CASE("degenerate treatment draws are resampled once then rejected") {
  SimConfig cfg = quick_config();
  cfg.n = 30;
  SimWorld w = gen_world(cfg, 23);
  w.alpha.setZero();
  w.alpha(0) = 50.0;  // score pushes nearly every unit into treatment
  w.X.col(0).setConstant(2.0);
  CHECK_THROWS_AS(gen_data(w, cfg, 5), DegenerateTreatment);
}

TEST_CASE("benchmark produces a sane row and respects the bias-variance identity") {
  SimConfig cfg = quick_config();
  BenchmarkRow row = benchmark(cfg);
  CHECK(row.reps_used + row.failures == cfg.reps);
  CHECK(row.rmse_debiased >= 0.0);
  CHECK(row.rmse_naive >= 0.0);
  const double reps = row.reps_used;
  CHECK(row.rmse_debiased * row.rmse_debiased >=
        row.sd_debiased * row.sd_debiased * (reps - 1.0) / reps - 1e-9);
}

TEST_CASE("doubling reps keeps the first half of estimates unchanged") {
  SimConfig cfg = quick_config();
  BenchmarkRow a = benchmark(cfg);
  SimConfig cfg2 = cfg;
  cfg2.reps = 20;
  BenchmarkRow b = benchmark(cfg2);
  REQUIRE(a.failures == 0);
  for (size_t i = 0; i < a.debiased.size(); ++i) CHECK(a.debiased[i] == b.debiased[i]);
}

TEST_CASE("thread count does not change benchmark numbers") {
  SimConfig cfg = quick_config();
  cfg.threads = 1;
  BenchmarkRow a = benchmark(cfg);
  cfg.threads = 2;
  BenchmarkRow b = benchmark(cfg);
  CHECK(a.debiased == b.debiased);
  CHECK(a.naive == b.naive);
  CHECK(a.rmse_debiased == b.rmse_debiased);
}

TEST_CASE("single-cell sensitivity reproduces benchmark bit for bit") {
  SimConfig cfg = quick_config();
  BenchmarkRow direct = benchmark(cfg);
  auto rows = sensitivity(cfg, {{cfg.K1, cfg.K2}});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].debiased == direct.debiased);
  CHECK(rows[0].rmse_debiased == direct.rmse_debiased);
}

TEST_CASE("sensitivity cells share replicate draws, differing only through K") {
  SimConfig cfg = quick_config();
  auto rows = sensitivity(cfg, {{2.0, 2.0}, {3.5, 3.5}});
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[0].failures == 0);
  REQUIRE(rows[1].failures == 0);
  // the naive estimator ignores the weights, so it must agree exactly
  CHECK(rows[0].naive == rows[1].naive);
  CHECK(rows[0].theta0 == rows[1].theta0);
}

TEST_CASE("a hopeless K floods the cell with escalations or failures") {
  SimConfig cfg = quick_config();
  cfg.reps = 10;
  auto rows = sensitivity(cfg, {{0.01, 0.01}, {2.75, 2.75}});
  CHECK(rows[0].escalated + rows[0].failures > rows[1].escalated + rows[1].failures);
  CHECK(rows[0].escalated + rows[0].failures >= 5);
}
