#include "medfx/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "medfx/rng.hpp"
#include "medfx/stats.hpp"

namespace medfx {

double z_quantile(double level) {
  if (!(level > 0.0 && level < 1.0))
    throw DimensionMismatch("confidence level must be in (0,1)");
  return normal_quantile(0.5 * (1.0 + level));
}

namespace detail {

struct PipelineFits {
  SplitPlan plan;
  bool swapped = false;
  std::vector<int> rows_med1, rows_out2, rows_med2;
  MultiResponseFit B;
  LassoFit phi;
  Eigen::MatrixXd W2;   // outcome-arm fold-2 design [X M]
  Eigen::VectorXd Y2;
  Eigen::MatrixXd X2c;  // mediator-arm fold-2 covariates
  Eigen::VectorXd x_bar, m_hat, contrast_a;
  Eigen::VectorXd v, v_res, b_off;
  double c_off = 0.0;
  std::vector<int> dsel_support;  // step-3 selection-lasso support
  double dsel_lambda = 0.0;
  Eigen::Index n_total = 0;
  int a_outcome = 1, a_mediator = 0;
};

}  // namespace detail

namespace {

using detail::PipelineFits;

std::vector<int> arm_rows(const Dataset& data, const std::vector<int>& fold, int arm) {
  std::vector<int> out;
  for (int i : fold)
    if (data.A(i) == arm) out.push_back(i);
  return out;
}

PipelineFits compute_fits(const Dataset& data, int a_outcome, int a_mediator,
                          const PipelineConfig& cfg, bool swap_folds) {
  const Eigen::Index p = data.p(), q = data.q();
  PipelineFits fits;
  fits.a_outcome = a_outcome;
  fits.a_mediator = a_mediator;
  fits.n_total = data.n();
  fits.swapped = swap_folds;
  fits.plan = split(data, cfg.seed);
  const std::vector<int>& d1 = swap_folds ? fits.plan.fold2 : fits.plan.fold1;
  const std::vector<int>& d2 = swap_folds ? fits.plan.fold1 : fits.plan.fold2;
  fits.rows_med1 = arm_rows(data, d1, a_mediator);
  fits.rows_out2 = arm_rows(data, d2, a_outcome);
  fits.rows_med2 = arm_rows(data, d2, a_mediator);
  for (const auto* rows : {&fits.rows_med1, &fits.rows_out2, &fits.rows_med2})
    if (rows->size() < 2) throw GroupTooSmall("a fold/arm cell has fewer than 2 rows");

  fits.x_bar = data.X.colwise().mean();

  // Step 1a: mediator model on fold-1 rows of the mediator arm
  {
    Eigen::MatrixXd x1(fits.rows_med1.size(), p);
    Eigen::MatrixXd m1(fits.rows_med1.size(), q);
    for (size_t r = 0; r < fits.rows_med1.size(); ++r) {
      x1.row(static_cast<Eigen::Index>(r)) = data.X.row(fits.rows_med1[r]);
      m1.row(static_cast<Eigen::Index>(r)) = data.M.row(fits.rows_med1[r]);
    }
    LassoOptions o;
    o.seed = derive_seed(cfg.seed, 3);
    o.threads = cfg.threads;
    if (cfg.lambda_b0) {
      fits.B.coef.resize(q, p);
      fits.B.intercept.resize(q);
      fits.B.fits.resize(static_cast<size_t>(q));
      for (Eigen::Index k = 0; k < q; ++k) {
        LassoFit f = lasso_fit(x1, m1.col(k), *cfg.lambda_b0, o);
        fits.B.coef.row(k) = f.coef.transpose();
        fits.B.intercept(k) = f.intercept;
        fits.B.fits[static_cast<size_t>(k)] = std::move(f);
      }
    } else {
      int folds = std::max(2, std::min<int>(cfg.cv_folds, static_cast<int>(x1.rows())));
      fits.B = multiresponse_fit(x1, m1, folds, cfg.cv_grid, o);
    }
  }

  // Step 1b: outcome model on fold-2 rows of the outcome arm
  {
    const auto n2 = static_cast<Eigen::Index>(fits.rows_out2.size());
    fits.W2.resize(n2, p + q);
    fits.Y2.resize(n2);
    for (Eigen::Index r = 0; r < n2; ++r) {
      fits.W2.row(r).head(p) = data.X.row(fits.rows_out2[static_cast<size_t>(r)]);
      fits.W2.row(r).tail(q) = data.M.row(fits.rows_out2[static_cast<size_t>(r)]);
      fits.Y2(r) = data.Y(fits.rows_out2[static_cast<size_t>(r)]);
    }
    LassoOptions o;
    o.seed = derive_seed(cfg.seed, 4);
    if (cfg.lambda_phi) {
      fits.phi = lasso_fit(fits.W2, fits.Y2, *cfg.lambda_phi, o);
    } else {
      int folds = std::max(2, std::min<int>(cfg.cv_folds, static_cast<int>(n2)));
      fits.phi = lasso_cv(fits.W2, fits.Y2, folds, cfg.cv_grid, o).second;
    }
    if (cfg.threshold_phi) {
      double level = *cfg.threshold_phi > 0.0 ? *cfg.threshold_phi : fits.phi.lambda / 2.0;
      fits.phi = hard_threshold(fits.phi, level, fits.W2, fits.Y2);
    }
  }

  fits.m_hat = fits.B.intercept + fits.B.coef * fits.x_bar;
  fits.contrast_a.resize(p + q);
  fits.contrast_a.head(p) = fits.x_bar;
  fits.contrast_a.tail(q) = fits.m_hat;

  // Step 3 inputs on fold-2 rows of the mediator arm
  {
    const auto nc = static_cast<Eigen::Index>(fits.rows_med2.size());
    fits.X2c.resize(nc, p);
    Eigen::MatrixXd m2(nc, q);
    for (Eigen::Index r = 0; r < nc; ++r) {
      fits.X2c.row(r) = data.X.row(fits.rows_med2[static_cast<size_t>(r)]);
      m2.row(r) = data.M.row(fits.rows_med2[static_cast<size_t>(r)]);
    }
    const Eigen::VectorXd gamma = fits.phi.coef.tail(q);
    fits.v = m2 * gamma;
    fits.b_off = fits.B.coef.transpose() * gamma;
    fits.c_off = fits.B.intercept.dot(gamma);
    fits.v_res = fits.v - fits.X2c * fits.b_off;
    fits.v_res.array() -= fits.c_off;

    const bool full_span =
        static_cast<double>(p + 1) <= cfg.step3_full_frac * static_cast<double>(nc);
    if (!full_span) {
      LassoOptions o;
      o.seed = derive_seed(cfg.seed, 5);
      if (cfg.lambda_b) {
        LassoFit sel = lasso_fit(fits.X2c, fits.v_res, *cfg.lambda_b, o);
        fits.dsel_support = sel.active_set;
        fits.dsel_lambda = sel.lambda;
      } else {
        int folds = std::max(2, std::min<int>(cfg.cv_folds, static_cast<int>(nc)));
        auto [cv, sel] = lasso_cv(fits.X2c, fits.v_res, folds, cfg.cv_grid, o);
        fits.dsel_support = sel.active_set;
        fits.dsel_lambda = sel.lambda;
      }
    }
  }
  return fits;
}

BalanceWeights zero_weights(Eigen::Index n, double resid_inf, double K) {
  BalanceWeights w;
  w.tau = Eigen::VectorXd::Zero(n);
  w.achieved_residual_inf = resid_inf;
  w.K_used = K;
  w.status = BalanceStatus::optimal;
  return w;
}

// conditional-on-selection influence vector: Z(Z'Z)^+ h + (I - P) tau
Eigen::VectorXd influence_vector(const Eigen::MatrixXd& z, const Eigen::VectorXd& h,
                                 const Eigen::VectorXd& tau) {
  Eigen::MatrixXd gram = z.transpose() * z;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(gram);
  Eigen::VectorXd gh = cod.solve(h);
  Eigen::VectorXd gt = cod.solve(z.transpose() * tau);
  return z * gh + tau - z * gt;
}

MediationEstimate assemble(const PipelineFits& fits, const PipelineConfig& cfg,
                           bool with_weights) {
  const Eigen::Index p = fits.x_bar.size(), q = fits.m_hat.size();
  const auto n1 = static_cast<Eigen::Index>(fits.rows_out2.size());
  const auto nc = static_cast<Eigen::Index>(fits.rows_med2.size());
  const Eigen::VectorXd gamma = fits.phi.coef.tail(q);

  MediationEstimate est;
  est.a_outcome = fits.a_outcome;
  est.a_mediator = fits.a_mediator;
  est.seed = cfg.seed;
  est.split = fits.plan;
  est.rows_outcome = fits.rows_out2;
  est.rows_mediator = fits.rows_med2;
  est.level = cfg.level;
  est.x_bar = fits.x_bar;
  est.contrast_a = fits.contrast_a;
  est.phi1 = fits.phi;
  est.B = fits.B;
  est.alpha_hat = fits.phi.intercept;

  est.theta_naive = fits.x_bar.dot(fits.phi.coef.head(p)) +
                    (fits.B.coef * fits.x_bar).dot(gamma);

  // Step 2: tau1 on the centered outcome-arm design, gap contrast
  const Eigen::RowVectorXd w2_mean = fits.W2.colwise().mean();
  if (with_weights) {
    Eigen::MatrixXd w2c = fits.W2.rowwise() - w2_mean;
    Eigen::VectorXd gap1 = fits.contrast_a - w2_mean.transpose();
    auto [w, lg] = solve_with_escalation(BalanceProblem::make(std::move(w2c), gap1, cfg.K1),
                                         cfg.qp, cfg.escalation);
    est.tau1 = std::move(w);
    est.tau1_log = std::move(lg);
  } else {
    est.tau1 = zero_weights(n1, 0.0, cfg.K1);
  }
  est.tau1_eff = est.tau1.tau.array() + (1.0 - est.tau1.tau.sum()) / static_cast<double>(n1);

  const Eigen::VectorXd& r1 = fits.phi.residuals;
  est.theta_01 = fits.phi.intercept + fits.contrast_a.dot(fits.phi.coef) +
                 est.tau1.tau.dot(r1);

  // Step 4: tau2 on the centered mediator-arm covariates
  const Eigen::RowVectorXd xc_mean = fits.X2c.colwise().mean();
  if (with_weights) {
    Eigen::MatrixXd xcc = fits.X2c.rowwise() - xc_mean;
    Eigen::VectorXd gap2 = fits.x_bar - xc_mean.transpose();
    auto [w, lg] = solve_with_escalation(BalanceProblem::make(std::move(xcc), gap2, cfg.K2),
                                         cfg.qp, cfg.escalation);
    est.tau2 = std::move(w);
    est.tau2_log = std::move(lg);
  } else {
    est.tau2 = zero_weights(nc, 0.0, cfg.K2);
  }
  est.tau2_eff = est.tau2.tau.array() + (1.0 - est.tau2.tau.sum()) / static_cast<double>(nc);

  // Step 3: least squares for the offset residual on the chosen support.
  // The fold-1 mediator model supplies the offset; the fold-2 fit only has to
  // estimate the (small) correction, which keeps its bias and variance down.
  std::vector<int> support;
  const bool full_span =
      static_cast<double>(p + 1) <= cfg.step3_full_frac * static_cast<double>(nc);
  if (full_span) {
    support.resize(static_cast<size_t>(p));
    std::iota(support.begin(), support.end(), 0);
  } else {
    int cap = std::max(8, static_cast<int>(cfg.step3_cap_frac * static_cast<double>(nc)));
    cap = std::min<int>({cap, static_cast<int>(p), std::max(1, static_cast<int>(nc) - 2)});
    // structural candidates ranked by |effective gap residual| x importance
    Eigen::VectorXd gap_eff =
        (fits.x_bar - fits.X2c.transpose() * est.tau2_eff).cwiseAbs();
    Eigen::VectorXd imp = fits.B.coef.cwiseAbs().transpose() * gamma.cwiseAbs();
    std::vector<char> in_sel(static_cast<size_t>(p), 0);
    for (int j : fits.dsel_support) in_sel[static_cast<size_t>(j)] = 1;
    support = fits.dsel_support;
    if (static_cast<int>(support.size()) > cap) {
      std::sort(support.begin(), support.end(), [&](int a, int b) {
        double sa = gap_eff(a) * imp(a), sb = gap_eff(b) * imp(b);
        return sa != sb ? sa > sb : a < b;
      });
      support.resize(static_cast<size_t>(cap));
    } else {
      std::vector<int> str;
      for (Eigen::Index j = 0; j < p; ++j)
        if (imp(j) > 0.0 && !in_sel[static_cast<size_t>(j)])
          str.push_back(static_cast<int>(j));
      std::sort(str.begin(), str.end(), [&](int a, int b) {
        double sa = gap_eff(a) * imp(a), sb = gap_eff(b) * imp(b);
        return sa != sb ? sa > sb : a < b;
      });
      for (int j : str) {
        if (static_cast<int>(support.size()) >= cap) break;
        support.push_back(j);
      }
    }
    std::sort(support.begin(), support.end());
  }

  LassoFit dfit = ols_refit(fits.X2c, fits.v_res, support);
  est.b = dfit;
  est.b.coef = fits.b_off + dfit.coef;
  est.b.intercept = fits.c_off + dfit.intercept;
  est.b.lambda = fits.dsel_lambda;
  est.b.active_set.clear();
  for (Eigen::Index j = 0; j < est.b.coef.size(); ++j)
    if (est.b.coef(j) != 0.0) est.b.active_set.push_back(static_cast<int>(j));
  est.b.residuals = dfit.residuals;  // v - c_hat - X b_hat
  est.cb_hat = est.b.intercept;

  const Eigen::VectorXd& r2 = est.b.residuals;
  est.theta_02 = est.b.intercept + fits.x_bar.dot(est.b.coef) + est.tau2.tau.dot(r2);

  est.overlap_correction = fits.m_hat.dot(gamma);
  est.theta_hat = est.theta_01 + est.theta_02 - est.overlap_correction;

  // Variance: exact conditional-on-selection influence of both fold-2 noise
  // sources, so the correction-regression noise is priced in as well.
  const auto n_active_phi = static_cast<Eigen::Index>(fits.phi.active_set.size());
  est.sigma1_hat2 =
      variance(r1, std::max<Eigen::Index>(n1 - n_active_phi, 1));
  const auto n_support = static_cast<Eigen::Index>(support.size());
  est.omega_hat2 =
      variance(r2, std::max<Eigen::Index>(nc - n_support - 1, 1));

  {
    Eigen::MatrixXd z1(n1, n_active_phi + 1);
    z1.col(0).setOnes();
    Eigen::VectorXd h1(n_active_phi + 1);
    h1(0) = 1.0;
    for (Eigen::Index j = 0; j < n_active_phi; ++j) {
      z1.col(j + 1) = fits.W2.col(fits.phi.active_set[static_cast<size_t>(j)]);
      h1(j + 1) = fits.contrast_a(fits.phi.active_set[static_cast<size_t>(j)]);
    }
    Eigen::VectorXd l1 = influence_vector(z1, h1, est.tau1.tau);

    Eigen::MatrixXd z2(nc, n_support + 1);
    z2.col(0).setOnes();
    Eigen::VectorXd h2(n_support + 1);
    h2(0) = 1.0;
    for (Eigen::Index j = 0; j < n_support; ++j) {
      z2.col(j + 1) = fits.X2c.col(support[static_cast<size_t>(j)]);
      h2(j + 1) = fits.x_bar(support[static_cast<size_t>(j)]);
    }
    Eigen::VectorXd l2 = influence_vector(z2, h2, est.tau2.tau);

    est.se = std::sqrt(est.sigma1_hat2 * l1.squaredNorm() +
                       est.omega_hat2 * l2.squaredNorm());
  }
  est.sigma_n2 = static_cast<double>(fits.n_total) * est.se * est.se;

  const double z = z_quantile(cfg.level);
  est.ci_lo = est.theta_hat - z * est.se;
  est.ci_hi = est.theta_hat + z * est.se;
  return est;
}

}  // namespace

MediationEstimate estimate_core(const Dataset& data, int a_outcome, int a_mediator,
                                const PipelineConfig& cfg, bool swap_folds,
                                bool with_weights) {
  PipelineFits fits = compute_fits(data, a_outcome, a_mediator, cfg, swap_folds);
  return assemble(fits, cfg, with_weights);
}

PipelineRun::PipelineRun(const Dataset& data, int a_outcome, int a_mediator,
                         const PipelineConfig& cfg, bool swap_folds)
    : fits_(std::make_unique<detail::PipelineFits>(
          compute_fits(data, a_outcome, a_mediator, cfg, swap_folds))) {}

PipelineRun::PipelineRun(PipelineRun&&) noexcept = default;
PipelineRun& PipelineRun::operator=(PipelineRun&&) noexcept = default;
PipelineRun::~PipelineRun() = default;

MediationEstimate PipelineRun::assemble(const PipelineConfig& cfg, bool with_weights) const {
  return medfx::assemble(*fits_, cfg, with_weights);
}

MediationEstimate estimate_debiased(const Dataset& data, const PipelineConfig& cfg) {
  return estimate_core(data, 1, 0, cfg);
}

double estimate_naive(const Dataset& data, const PipelineConfig& cfg) {
  PipelineFits fits = compute_fits(data, 1, 0, cfg, false);
  const Eigen::VectorXd gamma = fits.phi.coef.tail(data.q());
  return fits.x_bar.dot(fits.phi.coef.head(data.p())) +
         (fits.B.coef * fits.x_bar).dot(gamma);
}

MediationEstimate estimate_crossfit(const Dataset& data, const PipelineConfig& cfg) {
  MediationEstimate e1 = estimate_core(data, 1, 0, cfg, false);
  MediationEstimate e2 = estimate_core(data, 1, 0, cfg, true);
  MediationEstimate out = e1;
  out.crossfit = true;
  out.fold_estimates = {e1.theta_hat, e2.theta_hat};
  out.fold_ses = {e1.se, e2.se};
  out.theta_hat = 0.5 * (e1.theta_hat + e2.theta_hat);
  out.theta_01 = 0.5 * (e1.theta_01 + e2.theta_01);
  out.theta_02 = 0.5 * (e1.theta_02 + e2.theta_02);
  out.overlap_correction = 0.5 * (e1.overlap_correction + e2.overlap_correction);
  out.theta_naive = 0.5 * (e1.theta_naive + e2.theta_naive);
  out.se = 0.5 * std::sqrt(e1.se * e1.se + e2.se * e2.se);  // heuristic: folds share data
  out.sigma_n2 = static_cast<double>(data.n()) * out.se * out.se;
  const double z = z_quantile(cfg.level);
  out.ci_lo = out.theta_hat - z * out.se;
  out.ci_hi = out.theta_hat + z * out.se;
  return out;
}

BiasDiagnostic bias_diagnostic(const Dataset& data, const PipelineConfig& cfg,
                               const TrueParams& truth, const Eigen::VectorXd& eps,
                               const Eigen::MatrixXd& U) {
  truth.check_consistent();
  if (truth.p() != data.p() || truth.q() != data.q())
    throw DimensionMismatch("bias_diagnostic: truth dimensions do not match data");
  if (eps.size() != data.n() || U.rows() != data.n() || U.cols() != data.q())
    throw DimensionMismatch("bias_diagnostic: noise realizations do not match data");

  MediationEstimate est = estimate_debiased(data, cfg);
  const Eigen::Index q = data.q();
  const Eigen::VectorXd gamma_hat = est.phi1.coef.tail(q);
  Eigen::VectorXd phi_true(data.p() + q);
  phi_true.head(data.p()) = truth.beta1;
  phi_true.tail(q) = truth.gamma1;

  BiasDiagnostic d;
  d.theta0 = truth.alpha1 + truth.delta0.dot(truth.gamma1) +
             est.x_bar.dot(truth.beta1 + truth.B0.transpose() * truth.gamma1);
  d.total_error = est.theta_hat - d.theta0;

  const Eigen::VectorXd m_true = truth.delta0 + truth.B0 * est.x_bar;
  const Eigen::VectorXd m_hat = est.contrast_a.tail(q);
  d.delta1 = (m_hat - m_true).dot(truth.gamma1 - gamma_hat);
  d.bound_b_gamma = (m_hat - m_true).lpNorm<Eigen::Infinity>() *
                    (gamma_hat - truth.gamma1).lpNorm<1>();

  // rebuild the fold-2 designs to evaluate the balancing residuals
  Eigen::MatrixXd w2(est.rows_outcome.size(), data.p() + q);
  for (size_t r = 0; r < est.rows_outcome.size(); ++r) {
    w2.row(static_cast<Eigen::Index>(r)).head(data.p()) = data.X.row(est.rows_outcome[r]);
    w2.row(static_cast<Eigen::Index>(r)).tail(q) = data.M.row(est.rows_outcome[r]);
  }
  Eigen::VectorXd resid1 = est.contrast_a - w2.transpose() * est.tau1_eff;
  d.delta2 = resid1.dot(est.phi1.coef - phi_true);
  d.bound_phi = resid1.lpNorm<Eigen::Infinity>() * (est.phi1.coef - phi_true).lpNorm<1>();

  Eigen::MatrixXd xc(est.rows_mediator.size(), data.p());
  for (size_t r = 0; r < est.rows_mediator.size(); ++r)
    xc.row(static_cast<Eigen::Index>(r)) = data.X.row(est.rows_mediator[r]);
  Eigen::VectorXd resid2 = est.x_bar - xc.transpose() * est.tau2_eff;
  const Eigen::VectorXd b_true = truth.B0.transpose() * gamma_hat;
  d.delta3 = resid2.dot(est.b.coef - b_true);
  d.bound_b = resid2.lpNorm<Eigen::Infinity>() * (est.b.coef - b_true).lpNorm<1>();

  double vn = 0.0;
  for (size_t r = 0; r < est.rows_outcome.size(); ++r)
    vn += est.tau1_eff(static_cast<Eigen::Index>(r)) * eps(est.rows_outcome[r]);
  for (size_t r = 0; r < est.rows_mediator.size(); ++r)
    vn += est.tau2_eff(static_cast<Eigen::Index>(r)) *
          U.row(est.rows_mediator[r]).dot(gamma_hat);
  d.v_n = vn;
  d.identity_gap = d.total_error - (d.delta1 + d.delta2 + d.delta3 + d.v_n);
  return d;
}

}  // namespace medfx
