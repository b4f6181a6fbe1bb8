#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "medfx/balance.hpp"
#include "medfx/dataset.hpp"
#include "medfx/lasso.hpp"

namespace medfx {

struct PipelineConfig {
  double K1 = 2.75;
  double K2 = 2.75;
  double level = 0.95;
  uint64_t seed = 1;
  int cv_folds = 10;
  int cv_grid = 50;
  std::optional<double> threshold_phi;   // hard-threshold level for phi-hat;
                                         // nullopt = off, <=0 selects lambda_1se/2
  std::optional<double> lambda_b0;       // fixed-lambda overrides (skip CV)
  std::optional<double> lambda_phi;
  std::optional<double> lambda_b;
  int threads = 1;
  EscalationOptions escalation;
  BalanceSolveOptions qp;
  // step-3 support budget: least-squares on at most max(8, step3_cap_frac*n)
  // candidate columns; everything when p fits within the budget
  double step3_cap_frac = 0.35;
  double step3_full_frac = 0.60;
};

struct MediationEstimate {
  double theta_hat = 0.0;    // theta_01 + theta_02 - overlap_correction
  double theta_naive = 0.0;  // X_bar' (beta1_hat + B_hat' gamma1_hat)
  double theta_01 = 0.0;
  double theta_02 = 0.0;
  double overlap_correction = 0.0;  // (delta_hat + B_hat X_bar)' gamma1_hat
  double sigma_n2 = 0.0;
  double se = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;
  double level = 0.95;
  double sigma1_hat2 = 0.0;
  double omega_hat2 = 0.0;  // Var(U' gamma1) plug-in
  double alpha_hat = 0.0;   // outcome intercept
  double cb_hat = 0.0;      // step-3 intercept (delta' gamma path level)

  BalanceWeights tau1, tau2;
  Eigen::VectorXd tau1_eff, tau2_eff;  // tau + (1 - sum tau)/n_g
  std::vector<EscalationAttempt> tau1_log, tau2_log;

  LassoFit phi1;            // (beta1; gamma1), length p+q
  MultiResponseFit B;       // mediator-model fit (rows: mediators)
  LassoFit b;               // step-3 coefficient vector (with offset folded in)
  Eigen::VectorXd x_bar;    // full-sample covariate mean
  Eigen::VectorXd contrast_a;

  int a_outcome = 1;
  int a_mediator = 0;
  uint64_t seed = 0;
  SplitPlan split;
  std::vector<int> rows_outcome;   // D2 rows of the outcome arm
  std::vector<int> rows_mediator;  // D2 rows of the mediator arm

  // per-fold results when cross-fitting
  bool crossfit = false;
  std::vector<double> fold_estimates;
  std::vector<double> fold_ses;
};

// Algorithm pipeline for E[Y^(a_outcome, M^(a_mediator))]: the mediator model
// is fit on fold-1 rows of arm a_mediator, the outcome model on fold-2 rows of
// arm a_outcome, weights and the correction regression on fold 2.
MediationEstimate estimate_core(const Dataset& data, int a_outcome, int a_mediator,
                                const PipelineConfig& cfg, bool swap_folds = false,
                                bool with_weights = true);

namespace detail {
struct PipelineFits;
}

// Staged run: the K-independent regressions are computed once so that
// sensitivity grids can re-solve only the weight problems per (K1,K2).
class PipelineRun {
 public:
  PipelineRun(const Dataset& data, int a_outcome, int a_mediator,
              const PipelineConfig& cfg, bool swap_folds = false);
  PipelineRun(PipelineRun&&) noexcept;
  PipelineRun& operator=(PipelineRun&&) noexcept;
  ~PipelineRun();
  MediationEstimate assemble(const PipelineConfig& cfg, bool with_weights = true) const;

 private:
  std::unique_ptr<detail::PipelineFits> fits_;
};

// The mediation functional E[Y^(1, M^(0))].
MediationEstimate estimate_debiased(const Dataset& data, const PipelineConfig& cfg);

// Plug-in estimator from the same fold fits, no correction terms.
double estimate_naive(const Dataset& data, const PipelineConfig& cfg);

// Fold-swapped average; combined se = 0.5 sqrt(se1^2 + se2^2) (heuristic, the
// two passes share data).
MediationEstimate estimate_crossfit(const Dataset& data, const PipelineConfig& cfg);

struct BiasDiagnostic {
  // Holder bounds of the three product terms
  double bound_b_gamma = 0.0;   // ||m_hat - m_true||_inf * ||gamma1_hat - gamma1||_1
  double bound_phi = 0.0;       // ||a - W' tau1_eff||_inf * ||phi1_hat - phi1||_1
  double bound_b = 0.0;         // ||X_bar - Xc' tau2_eff||_inf * ||b_hat - b||_1
  // signed inner products (their sum is Delta_n exactly)
  double delta1 = 0.0, delta2 = 0.0, delta3 = 0.0;
  double v_n = 0.0;             // sum tau1_eff eps + sum tau2_eff U' gamma1_hat
  double total_error = 0.0;     // theta_hat - theta0
  double theta0 = 0.0;
  double identity_gap = 0.0;    // total_error - (delta1+delta2+delta3+v_n)
};

// Error decomposition against known truth and realized noise; requires the
// noise rows aligned with `data`. theta0 is the intercept-inclusive
// counterfactual target, which reduces to X_bar'(beta1 + B0' gamma1) when the
// true intercepts vanish.
BiasDiagnostic bias_diagnostic(const Dataset& data, const PipelineConfig& cfg,
                               const TrueParams& truth, const Eigen::VectorXd& eps,
                               const Eigen::MatrixXd& U);

double z_quantile(double level);  // two-sided: Phi^{-1}((1+level)/2)

}  // namespace medfx
