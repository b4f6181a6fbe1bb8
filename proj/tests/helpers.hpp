#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "medfx/balance.hpp"
#include "medfx/dataset.hpp"
#include "medfx/lasso.hpp"
#include "medfx/rng.hpp"

namespace medfx::testing {

inline Eigen::MatrixXd random_matrix(Rng& rng, int n, int d, double sd = 1.0) {
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = rng.normal(0.0, sd);
  return x;
}

// KKT stationarity of a lasso fit on the standardized scale:
// inactive columns: |(1/n) xt_j' r| <= lambda + tol
// active columns:   |(1/n) xt_j' r - lambda sign(coef_j)| <= tol
inline bool kkt_ok(const LassoFit& fit, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   double tol = 1e-5, bool standardized = true, bool intercept = true) {
  const auto n = static_cast<double>(x.rows());
  Eigen::VectorXd r = y - x * fit.coef;
  r.array() -= fit.intercept;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double m = intercept ? x.col(j).mean() : 0.0;
    double s = 1.0;
    if (standardized) {
      s = std::sqrt(std::max(x.col(j).squaredNorm() / n - m * m, 0.0));
      if (!(s > 0.0)) return false;
    }
    double g = ((x.col(j).array() - m) * r.array()).sum() / (n * s);
    if (fit.coef(j) == 0.0) {
      if (std::abs(g) > fit.lambda + tol) return false;
    } else {
      double sign = fit.coef(j) > 0 ? 1.0 : -1.0;
      if (std::abs(g - fit.lambda * sign) > tol) return false;
    }
  }
  return true;
}

// penalized objective on the standardized scale
inline double lasso_objective(const LassoFit& fit, const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& y, double lambda) {
  const auto n = static_cast<double>(x.rows());
  Eigen::VectorXd r = y - x * fit.coef;
  r.array() -= fit.intercept;
  double pen = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double m = x.col(j).mean();
    double s = std::sqrt(std::max(x.col(j).squaredNorm() / n - m * m, 0.0));
    pen += s * std::abs(fit.coef(j));
  }
  return 0.5 * r.squaredNorm() / n + lambda * pen;
}

// Multiresolution grid search for the balance QP; independent of the ADMM
// path. Feasible instances only; returns the best objective found.
inline double brute_force_balance(const BalanceProblem& pb, int levels = 13,
                                  int pts = 17) {
  const int n = static_cast<int>(pb.n_g());
  const double slack = pb.slack();
  Eigen::VectorXd center = Eigen::VectorXd::Zero(n);
  double width = pb.cap;
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_tau = center;

  std::vector<int> idx(static_cast<size_t>(n), 0);
  Eigen::VectorXd tau(n);
  for (int level = 0; level < levels; ++level) {
    std::fill(idx.begin(), idx.end(), 0);
    bool carry = false;
    while (!carry) {
      for (int i = 0; i < n; ++i) {
        double t = center(i) - width + 2.0 * width * idx[static_cast<size_t>(i)] / (pts - 1);
        tau(i) = std::clamp(t, -pb.cap, pb.cap);
      }
      double resid = (pb.contrast - pb.design.transpose() * tau).lpNorm<Eigen::Infinity>();
      if (resid <= slack + 1e-9) {
        double obj = tau.squaredNorm();
        if (obj < best) {
          best = obj;
          best_tau = tau;
        }
      }
      int i = 0;
      for (; i < n; ++i) {
        if (++idx[static_cast<size_t>(i)] < pts) break;
        idx[static_cast<size_t>(i)] = 0;
      }
      carry = (i == n);
    }
    center = best_tau;
    width *= 2.5 / (pts - 1);
  }
  return best;
}

}  // namespace medfx::testing
