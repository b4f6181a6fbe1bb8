#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "medfx/errors.hpp"

namespace medfx {

// min ||tau||_2^2  s.t.  ||contrast - design' tau||_inf <= K sqrt(log(d)/n_g)
//                        ||tau||_inf <= cap
struct BalanceProblem {
  Eigen::MatrixXd design;   // n_g x d
  Eigen::VectorXd contrast; // d
  double K = 2.75;
  double cap = 0.0;         // n_g^{-2/3} unless overridden

  static BalanceProblem make(Eigen::MatrixXd design, Eigen::VectorXd contrast, double K);
  double slack() const;     // K * sqrt(log(d) / n_g), exactly
  Eigen::Index n_g() const { return design.rows(); }
  Eigen::Index d() const { return design.cols(); }
};

enum class BalanceStatus { optimal, infeasible, max_iter };

struct BalanceWeights {
  Eigen::VectorXd tau;
  double achieved_residual_inf = 0.0;
  double achieved_cap_inf = 0.0;
  double objective = 0.0;  // ||tau||_2^2
  double K_used = 0.0;
  int iterations = 0;
  BalanceStatus status = BalanceStatus::optimal;
  // for infeasible: best attainable inf-residual under the cap alone
  double infeasibility_certificate = 0.0;
};

struct BalanceSolveOptions {
  double tol_primal = 1e-6;
  double tol_dual = 1e-6;
  int max_iter = 50000;
  double over_relax = 1.6;
};

BalanceWeights solve_weights(const BalanceProblem& problem,
                             const BalanceSolveOptions& opts = {});

struct EscalationAttempt {
  double K = 0.0;
  double residual_inf = 0.0;
  BalanceStatus status = BalanceStatus::optimal;
};

struct EscalationOptions {
  double factor = 1.5;
  int max_attempts = 5;
};

struct StillInfeasible : std::runtime_error {
  std::vector<EscalationAttempt> log;
  explicit StillInfeasible(std::vector<EscalationAttempt> attempts);
};

// Retry with K <- K*factor until the QP is solved; throws StillInfeasible
// (carrying the attempt log) when max_attempts are exhausted.
std::pair<BalanceWeights, std::vector<EscalationAttempt>> solve_with_escalation(
    const BalanceProblem& problem, const BalanceSolveOptions& opts = {},
    const EscalationOptions& esc = {});

// Feasible-point construction from known population moments:
//   tau*_i = (1/n_g) contrast' Sigma^{-1} (row_i - mu).
// Simulation-side oracle for the feasibility lemma; not used by the pipeline.
Eigen::VectorXd oracle_weights(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& mu,
                               const Eigen::VectorXd& contrast,
                               const Eigen::MatrixXd& design);

// min ||contrast - design' tau||_inf s.t. ||tau||_inf <= cap, solved by the
// same splitting; used to certify infeasibility after max_iter.
double min_inf_residual(const BalanceProblem& problem, int max_iter = 20000);

}  // namespace medfx
