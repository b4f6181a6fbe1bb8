#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "medfx/errors.hpp"

namespace medfx {

// Observed sample. A is stored as int (0/1); validate() reports anything else.
struct Dataset {
  Eigen::MatrixXd X;  // n x p covariates
  Eigen::MatrixXd M;  // n x q mediators
  Eigen::VectorXi A;  // treatment indicator
  Eigen::VectorXd Y;  // outcome

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
  Eigen::Index q() const { return M.cols(); }
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> problems;
  void fail(std::string msg) {
    ok = false;
    problems.push_back(std::move(msg));
  }
};

// Total: always returns a report, never throws.
ValidationReport validate(const Dataset& data);

// Rows of one treatment arm, in dataset order.
struct GroupView {
  std::vector<int> indices;
  Eigen::MatrixXd X_g;
  Eigen::MatrixXd M_g;
  Eigen::VectorXd Y_g;
  int n_g = 0;
};

GroupView group_view(const Dataset& data, int a);

struct SplitPlan {
  std::vector<int> fold1;
  std::vector<int> fold2;
  bool stratified = true;
  uint64_t seed = 0;
};

// Stratified 50/50 split. One global seeded permutation is drawn and each
// treatment arm is dealt in permutation order: first ceil(n_g/2) members to
// fold1, rest to fold2 (odd member goes to fold1). Using a single permutation
// keeps the assignment invariant under relabeling A <- 1-A.
// Throws GroupTooSmall if any (arm x fold) cell would have < 2 rows.
SplitPlan split(const Dataset& data, uint64_t seed);

// Row subset, preserving order of `rows`.
Dataset subset(const Dataset& data, const std::vector<int>& rows);

// All DGP coefficients; intercepts are zero in the standard simulator but the
// estimator and the effects module accept arbitrary values.
struct TrueParams {
  double alpha0 = 0.0, alpha1 = 0.0;   // outcome intercepts
  Eigen::VectorXd beta0, beta1;        // p
  Eigen::VectorXd gamma0, gamma1;      // q
  Eigen::VectorXd delta0, delta1;      // q, mediator intercepts
  Eigen::MatrixXd B0, B1;              // q x p
  double sigma_eps = 1.0;
  double sigma_u = 1.0;

  Eigen::Index p() const { return beta1.size(); }
  Eigen::Index q() const { return gamma1.size(); }
  void check_consistent() const;
};

}  // namespace medfx
