#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "medfx/dataset.hpp"
#include "medfx/pipeline.hpp"

namespace medfx {

struct SimConfig {
  int n = 500;
  int p = 50;
  int q = 50;
  int s = 5;        // nonzeros per row of B0, B1
  int k1 = 5;       // nonzeros of beta0, beta1
  int k2 = 5;       // nonzeros of gamma0, gamma1
  double sigma2 = 0.1;
  double K1 = 2.75;
  double K2 = 2.75;
  int reps = 100;
  uint64_t master_seed = 1;
  int threads = 0;  // 0 = hardware
  PipelineConfig pipeline;  // K1/K2/seed fields are overridden per replicate
};

// Coefficients per the benchmark design: B rows carry s nonzeros from
// U(0.5,1), beta/gamma carry k nonzeros from U(0.5,1.5), treatment scores use
// 5 nonzeros from U(0,2). Intercepts are zero. Sigma_X = R diag(lam) R' with R
// the sign-corrected Q factor of a Gaussian matrix and lam ~ U[1,2].
struct SimWorld {
  TrueParams params;
  Eigen::VectorXd alpha;     // treatment score coefficients
  Eigen::MatrixXd sigma_x_root;  // R diag(sqrt(lam)) R'
  Eigen::MatrixXd sigma_x;
  Eigen::MatrixXd X;         // fixed across replications
};

TrueParams gen_params(const SimConfig& cfg, uint64_t seed);

// params + alpha + Sigma_X + one fixed X draw, all from one seed
SimWorld gen_world(const SimConfig& cfg, uint64_t seed);

// One replication: A, mediator noise, outcome noise. X stays fixed.
struct SimDraw {
  Dataset data;
  Eigen::VectorXd eps;  // realized outcome shock per row (eps or eps')
  Eigen::MatrixXd U;    // realized mediator shock per row (U or U')
};

SimDraw gen_data(const SimWorld& world, const SimConfig& cfg, uint64_t rep_seed);

// X_bar' (beta1 + B0' gamma1)
double true_theta(const TrueParams& params, const Eigen::VectorXd& x_bar);

// intercept-inclusive counterfactual mean (alpha_{a'} + delta_a' gamma_{a'})
// + x_bar' (beta_{a'} + B_a' gamma_{a'})
double true_counterfactual_mean(const TrueParams& params, int a_outcome, int a_mediator,
                                const Eigen::VectorXd& x_bar);

struct BenchmarkRow {
  SimConfig config;
  double rmse_debiased = 0.0;
  double sd_debiased = 0.0;
  double rmse_naive = 0.0;
  double sd_naive = 0.0;
  int reps_used = 0;
  int failures = 0;
  int escalated = 0;   // replicates needing K escalation in either weight solve
  double theta0 = 0.0;
  std::vector<double> debiased;  // per-replicate estimates (kept for pairing)
  std::vector<double> naive;
};

BenchmarkRow benchmark(const SimConfig& cfg);

// benchmark() per (K1,K2) cell, sharing the world and the replicate seeds so
// cells differ only through the tuning constants.
std::vector<BenchmarkRow> sensitivity(const SimConfig& cfg,
                                      const std::vector<std::pair<double, double>>& k_grid);

}  // namespace medfx
