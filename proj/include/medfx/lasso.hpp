#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "medfx/errors.hpp"

namespace medfx {

struct LassoOptions {
  double tol = 1e-7;        // max standardized-coefficient change per sweep
  int max_passes = 100000;  // total coordinate sweeps
  bool standardize = true;  // center + unit-SD columns, penalty on that scale
  bool fit_intercept = true;
  uint64_t seed = 0;        // CV fold assignment
  int threads = 1;          // multiresponse fan-out
};

struct LassoFit {
  Eigen::VectorXd coef;        // original scale
  double intercept = 0.0;
  double lambda = 0.0;
  std::vector<int> active_set;  // j with coef[j] != 0, ascending
  int n_iter = 0;
  Eigen::VectorXd residuals;   // y - intercept - X*coef
  bool converged = true;

  double predict_at(const Eigen::VectorXd& x) const { return intercept + coef.dot(x); }
};

struct CvResult {
  Eigen::VectorXd lambda_grid;  // descending
  Eigen::VectorXd cv_mean;
  Eigen::VectorXd cv_se;
  double lambda_min = 0.0;
  double lambda_1se = 0.0;
  int folds = 0;
  uint64_t fold_seed = 0;
};

// Penalized objective: (1/2n)||y - b0 - X b||^2 + lambda * ||b||_1, with the
// penalty applied on the standardized column scale when opts.standardize.
// Coefficients come back on the original scale. A column of zero variance is
// an error (DegenerateColumn) rather than a silent exclusion.
LassoFit lasso_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                   double lambda, const LassoOptions& opts = {});

// Largest penalty with an all-zero solution.
double lasso_lambda_max(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                        const LassoOptions& opts = {});

// K-fold CV over a log-spaced grid from lambda_max down to 1e-3*lambda_max,
// warm starts along the path; returns the curve and the refit at lambda_1se.
std::pair<CvResult, LassoFit> lasso_cv(const Eigen::MatrixXd& design,
                                       const Eigen::VectorXd& response, int folds,
                                       int grid_size, const LassoOptions& opts = {});

struct MultiResponseFit {
  Eigen::MatrixXd coef;       // q x p; row k is the fit for response k
  Eigen::VectorXd intercept;  // q
  std::vector<LassoFit> fits;
};

// q parallel lasso_cv fits of the columns of responses on the shared design.
// The Gram matrix of each CV training block is computed once and shared.
MultiResponseFit multiresponse_fit(const Eigen::MatrixXd& design,
                                   const Eigen::MatrixXd& responses, int folds,
                                   int grid_size, const LassoOptions& opts = {});

// Zero out |coef_j| < level, recompute active set and residuals.
LassoFit hard_threshold(const LassoFit& fit, double level, const Eigen::MatrixXd& design,
                        const Eigen::VectorXd& response);

// Unpenalized least squares of `response` on the active columns of `keep`
// (rank-safe). Returned as a LassoFit with lambda = 0; KKT guarantees of
// lasso_fit do not apply to refits.
LassoFit ols_refit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                   const std::vector<int>& keep, bool fit_intercept = true);

}  // namespace medfx
