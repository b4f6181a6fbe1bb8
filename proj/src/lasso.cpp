#include "medfx/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "medfx/rng.hpp"
#include "medfx/threadpool.hpp"

namespace medfx {

namespace {

inline double soft(double z, double lam) {
  if (z > lam) return z - lam;
  if (z < -lam) return z + lam;
  return 0.0;
}

struct Standardizer {
  Eigen::VectorXd col_mean;  // zero when not centering
  Eigen::VectorXd col_scale; // one when not scaling
  double y_mean = 0.0;

  static Standardizer make(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const LassoOptions& opts) {
    const auto n = static_cast<double>(x.rows());
    Standardizer s;
    s.col_mean = opts.fit_intercept ? Eigen::VectorXd(x.colwise().mean())
                                    : Eigen::VectorXd::Zero(x.cols());
    s.y_mean = opts.fit_intercept ? y.mean() : 0.0;
    s.col_scale.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      double ss = x.col(j).squaredNorm() / n - s.col_mean(j) * s.col_mean(j);
      double sd = std::sqrt(std::max(ss, 0.0));
      if (opts.standardize) {
        if (!(sd > 0.0)) throw DegenerateColumn(static_cast<int>(j));
        s.col_scale(j) = sd;
      } else {
        s.col_scale(j) = 1.0;
      }
    }
    return s;
  }
};

// Cyclic coordinate descent over a descending lambda grid with warm starts.
// Residual-update form; `beta` is on the standardized scale throughout.
// on_lambda is invoked after convergence at each grid point.
template <typename Callback>
int solve_path_naive(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                     const Eigen::VectorXd& grid, const LassoOptions& opts,
                     bool& converged, Callback&& on_lambda) {
  const auto n = static_cast<double>(xs.rows());
  const auto d = xs.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd resid = ys;
  std::vector<char> active(static_cast<size_t>(d), 0);
  int passes = 0;
  converged = true;

  auto sweep = [&](double lam, bool full) {
    double maxd = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!full && !active[static_cast<size_t>(j)]) continue;
      const double bj = beta(j);
      const double z = xs.col(j).dot(resid) / n + bj;
      const double nb = soft(z, lam);
      if (nb != bj) {
        resid.noalias() -= xs.col(j) * (nb - bj);
        beta(j) = nb;
        maxd = std::max(maxd, std::abs(nb - bj));
      }
      active[static_cast<size_t>(j)] = (beta(j) != 0.0);
    }
    return maxd;
  };

  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double lam = grid(g);
    bool lam_done = false;
    while (!lam_done) {
      ++passes;
      double maxd = sweep(lam, true);
      if (maxd < opts.tol) {
        lam_done = true;
        break;
      }
      while (true) {
        ++passes;
        double md = sweep(lam, false);
        if (md < opts.tol || passes >= opts.max_passes) break;
      }
      if (passes >= opts.max_passes) {
        converged = false;
        lam_done = true;
      }
    }
    on_lambda(g, beta, resid);
    if (!converged) break;
  }
  return passes;
}

struct StdData {
  Standardizer st;
  Eigen::MatrixXd xs;
  Eigen::VectorXd ys;
};

StdData standardize_data(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                         const LassoOptions& opts) {
  StdData d;
  d.st = Standardizer::make(design, response, opts);
  d.xs = design;
  d.xs.rowwise() -= d.st.col_mean.transpose();
  d.xs.array().rowwise() /= d.st.col_scale.transpose().array();
  d.ys = response.array() - d.st.y_mean;
  return d;
}

double lambda_max_of(const StdData& d) {
  const auto n = static_cast<double>(d.xs.rows());
  double lmax = 0.0;
  for (Eigen::Index j = 0; j < d.xs.cols(); ++j)
    lmax = std::max(lmax, std::abs(d.xs.col(j).dot(d.ys) / n));
  return lmax;
}

}  // namespace

double lasso_lambda_max(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                        const LassoOptions& opts) {
  return lambda_max_of(standardize_data(design, response, opts));
}

LassoFit lasso_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                   double lambda, const LassoOptions& opts) {
  if (design.rows() < 2) throw DimensionMismatch("lasso_fit: need at least 2 rows");
  if (design.rows() != response.size())
    throw DimensionMismatch("lasso_fit: design rows and response length differ");
  if (!(lambda >= 0.0)) throw DimensionMismatch("lasso_fit: lambda must be >= 0");

  StdData sd = standardize_data(design, response, opts);
  const Standardizer& st = sd.st;
  Eigen::MatrixXd& xs = sd.xs;
  Eigen::VectorXd& ys = sd.ys;

  Eigen::VectorXd grid(1);
  grid << lambda;
  LassoFit fit;
  bool conv = true;
  Eigen::VectorXd beta_std;
  Eigen::VectorXd resid_std;
  int passes = solve_path_naive(xs, ys, grid, opts, conv,
                                [&](Eigen::Index, const Eigen::VectorXd& b,
                                    const Eigen::VectorXd& r) {
                                  beta_std = b;
                                  resid_std = r;
                                });
  fit.coef = beta_std.array() / st.col_scale.array();
  fit.intercept = st.y_mean - st.col_mean.dot(fit.coef);
  fit.lambda = lambda;
  fit.residuals = resid_std;
  fit.converged = conv;
  fit.n_iter = passes;
  for (Eigen::Index j = 0; j < fit.coef.size(); ++j)
    if (fit.coef(j) != 0.0) fit.active_set.push_back(static_cast<int>(j));
  return fit;
}

namespace {

Eigen::VectorXd make_grid(double lmax, int grid_size) {
  Eigen::VectorXd grid(grid_size);
  if (grid_size == 1) {
    grid(0) = lmax;
    return grid;
  }
  const double ratio = 1e-3;
  for (int i = 0; i < grid_size; ++i)
    grid(i) = lmax * std::pow(ratio, static_cast<double>(i) / (grid_size - 1));
  return grid;
}

std::vector<int> fold_of_rows(Eigen::Index n, int folds, uint64_t seed) {
  Rng rng(derive_seed(seed, 2));
  std::vector<int> perm = rng.permutation(static_cast<int>(n));
  std::vector<int> fold(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    fold[static_cast<size_t>(perm[static_cast<size_t>(i)])] = static_cast<int>(i % folds);
  return fold;
}

LassoFit zero_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  const LassoOptions& opts) {
  LassoFit fit;
  fit.coef = Eigen::VectorXd::Zero(design.cols());
  fit.intercept = opts.fit_intercept ? response.mean() : 0.0;
  fit.lambda = 0.0;
  fit.residuals = response.array() - fit.intercept;
  fit.converged = true;
  return fit;
}

}  // namespace

std::pair<CvResult, LassoFit> lasso_cv(const Eigen::MatrixXd& design,
                                       const Eigen::VectorXd& response, int folds,
                                       int grid_size, const LassoOptions& opts) {
  const Eigen::Index n = design.rows();
  if (folds < 2) throw DimensionMismatch("lasso_cv: folds must be >= 2");
  if (n < folds) throw DimensionMismatch("lasso_cv: need n >= folds");
  if (grid_size < 1) throw DimensionMismatch("lasso_cv: grid_size must be >= 1");

  CvResult cv;
  cv.folds = folds;
  cv.fold_seed = opts.seed;

  StdData full = standardize_data(design, response, opts);
  const double lmax = lambda_max_of(full);
  if (!(lmax > 1e-300)) {
    // response is (numerically) constant after centering
    cv.lambda_grid = Eigen::VectorXd::Zero(1);
    cv.cv_mean = Eigen::VectorXd::Zero(1);
    cv.cv_se = Eigen::VectorXd::Zero(1);
    return {cv, zero_fit(design, response, opts)};
  }
  cv.lambda_grid = make_grid(lmax, grid_size);

  const std::vector<int> fold = fold_of_rows(n, folds, opts.seed);
  Eigen::MatrixXd fold_mse(grid_size, folds);

  for (int f = 0; f < folds; ++f) {
    std::vector<int> train, test;
    for (Eigen::Index i = 0; i < n; ++i)
      (fold[static_cast<size_t>(i)] == f ? test : train).push_back(static_cast<int>(i));
    Eigen::MatrixXd xtr(train.size(), design.cols());
    Eigen::VectorXd ytr(train.size());
    for (size_t r = 0; r < train.size(); ++r) {
      xtr.row(static_cast<Eigen::Index>(r)) = design.row(train[r]);
      ytr(static_cast<Eigen::Index>(r)) = response(train[r]);
    }
    StdData tr = standardize_data(xtr, ytr, opts);
    const Standardizer& st = tr.st;

    bool conv = true;
    solve_path_naive(tr.xs, tr.ys, cv.lambda_grid, opts, conv,
                     [&](Eigen::Index g, const Eigen::VectorXd& beta_std,
                         const Eigen::VectorXd&) {
                       double sse = 0.0;
                       for (int ti : test) {
                         double pred = st.y_mean;
                         for (Eigen::Index j = 0; j < beta_std.size(); ++j) {
                           if (beta_std(j) == 0.0) continue;
                           pred += (design(ti, j) - st.col_mean(j)) / st.col_scale(j) *
                                   beta_std(j);
                         }
                         const double e = response(ti) - pred;
                         sse += e * e;
                       }
                       fold_mse(g, f) = sse / static_cast<double>(test.size());
                     });
  }

  cv.cv_mean = fold_mse.rowwise().mean();
  cv.cv_se.resize(grid_size);
  for (int g = 0; g < grid_size; ++g) {
    double m = cv.cv_mean(g), s = 0.0;
    for (int f = 0; f < folds; ++f) s += (fold_mse(g, f) - m) * (fold_mse(g, f) - m);
    cv.cv_se(g) = std::sqrt(s / std::max(folds - 1, 1)) / std::sqrt(static_cast<double>(folds));
  }

  Eigen::Index imin = 0;
  cv.cv_mean.minCoeff(&imin);
  cv.lambda_min = cv.lambda_grid(imin);
  const double thresh = cv.cv_mean(imin) + cv.cv_se(imin);
  Eigen::Index i1se = imin;
  for (Eigen::Index g = 0; g < cv.lambda_grid.size(); ++g)
    if (cv.cv_mean(g) <= thresh) {
      i1se = g;  // grid is descending, first hit is the largest lambda
      break;
    }
  cv.lambda_1se = cv.lambda_grid(i1se);

  // full-data path down to lambda_1se, warm-started
  const Standardizer& st = full.st;
  Eigen::MatrixXd& xs = full.xs;
  Eigen::VectorXd& ys = full.ys;
  Eigen::VectorXd path = cv.lambda_grid.head(i1se + 1);

  LassoFit fit;
  bool conv = true;
  Eigen::VectorXd beta_std, resid_std;
  int passes = solve_path_naive(xs, ys, path, opts, conv,
                                [&](Eigen::Index g, const Eigen::VectorXd& b,
                                    const Eigen::VectorXd& r) {
                                  if (g == path.size() - 1) {
                                    beta_std = b;
                                    resid_std = r;
                                  }
                                });
  fit.coef = beta_std.array() / st.col_scale.array();
  fit.intercept = st.y_mean - st.col_mean.dot(fit.coef);
  fit.lambda = cv.lambda_1se;
  fit.residuals = resid_std;
  fit.converged = conv;
  fit.n_iter = passes;
  for (Eigen::Index j = 0; j < fit.coef.size(); ++j)
    if (fit.coef(j) != 0.0) fit.active_set.push_back(static_cast<int>(j));
  return {cv, fit};
}

namespace {

// Gram-mode coordinate descent, used by multiresponse_fit where many
// responses share one design: the per-fold standardized Gram is computed once
// and every response reuses it.
template <typename Callback>
int solve_path_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty,
                    const Eigen::VectorXd& grid, const LassoOptions& opts,
                    bool& converged, Callback&& on_lambda) {
  const auto d = gram.rows();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd grad = xty;  // (1/n) Xs' (ys - Xs beta)
  std::vector<char> active(static_cast<size_t>(d), 0);
  int passes = 0;
  converged = true;

  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double lam = grid(g);
    bool lam_done = false;
    while (!lam_done) {
      auto sweep = [&](bool full) {
        double maxd = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
          if (!full && !active[static_cast<size_t>(j)]) continue;
          const double bj = beta(j);
          const double nb = soft(grad(j) + bj, lam);
          if (nb != bj) {
            grad.noalias() -= gram.col(j) * (nb - bj);
            beta(j) = nb;
            maxd = std::max(maxd, std::abs(nb - bj));
          }
          active[static_cast<size_t>(j)] = (beta(j) != 0.0);
        }
        return maxd;
      };
      ++passes;
      double maxd = sweep(true);
      if (maxd < opts.tol) {
        lam_done = true;
        break;
      }
      while (true) {
        ++passes;
        double md = sweep(false);
        if (md < opts.tol || passes >= opts.max_passes) break;
      }
      if (passes >= opts.max_passes) {
        converged = false;
        lam_done = true;
      }
    }
    on_lambda(g, beta);
    if (!converged) break;
  }
  return passes;
}

}  // namespace

MultiResponseFit multiresponse_fit(const Eigen::MatrixXd& design,
                                   const Eigen::MatrixXd& responses, int folds,
                                   int grid_size, const LassoOptions& opts) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  const Eigen::Index q = responses.cols();
  if (n == 0 || q == 0) throw DimensionMismatch("multiresponse_fit: empty input");
  if (responses.rows() != n)
    throw DimensionMismatch("multiresponse_fit: responses rows must match design");

  MultiResponseFit out;
  out.coef.resize(q, p);
  out.intercept.resize(q);
  out.fits.resize(static_cast<size_t>(q));

  if (q <= 2) {
    // Gram precomputation does not pay off; reuse the single-response path.
    for (Eigen::Index k = 0; k < q; ++k) {
      auto [cvk, fitk] = lasso_cv(design, responses.col(k), folds, grid_size, opts);
      out.coef.row(k) = fitk.coef.transpose();
      out.intercept(k) = fitk.intercept;
      out.fits[static_cast<size_t>(k)] = std::move(fitk);
    }
    return out;
  }

  const std::vector<int> fold = fold_of_rows(n, folds, opts.seed);

  // raw cross-products, shared across responses and folds
  const Eigen::MatrixXd gram_full = design.transpose() * design;
  const Eigen::VectorXd colsum_full = design.colwise().sum();
  const Eigen::MatrixXd xty_full = design.transpose() * responses;  // p x q
  const Eigen::VectorXd ysum_full = responses.colwise().sum();

  struct PerLambda {
    double lmax;
    Eigen::VectorXd grid;
  };
  std::vector<PerLambda> pl(static_cast<size_t>(q));

  std::vector<Eigen::MatrixXd> mse_per_resp(static_cast<size_t>(q),
                                            Eigen::MatrixXd::Zero(grid_size, folds));

  // full-data standardization for the lambda grids
  {
    LassoOptions o = opts;
    for (Eigen::Index k = 0; k < q; ++k) {
      double lmax = lasso_lambda_max(design, responses.col(k), o);
      pl[static_cast<size_t>(k)].lmax = lmax;
      if (lmax > 1e-300) pl[static_cast<size_t>(k)].grid = make_grid(lmax, grid_size);
    }
  }

  auto run_block = [&](int f, const std::vector<int>& test_rows) {
    // training cross-products by downdating the held-out block
    Eigen::MatrixXd xout(test_rows.size(), p);
    Eigen::MatrixXd yout(test_rows.size(), q);
    for (size_t r = 0; r < test_rows.size(); ++r) {
      xout.row(static_cast<Eigen::Index>(r)) = design.row(test_rows[r]);
      yout.row(static_cast<Eigen::Index>(r)) = responses.row(test_rows[r]);
    }
    const double ntr = static_cast<double>(n) - static_cast<double>(test_rows.size());
    Eigen::MatrixXd gram_tr = gram_full - xout.transpose() * xout;
    Eigen::VectorXd colsum_tr = colsum_full - xout.colwise().sum().transpose();
    Eigen::MatrixXd xty_tr = xty_full - xout.transpose() * yout;
    Eigen::VectorXd ysum_tr = ysum_full - yout.colwise().sum().transpose();

    Eigen::VectorXd cmean = opts.fit_intercept ? Eigen::VectorXd(colsum_tr / ntr)
                                               : Eigen::VectorXd::Zero(p);
    Eigen::VectorXd cscale(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      double ss = gram_tr(j, j) / ntr - cmean(j) * cmean(j);
      double sd = std::sqrt(std::max(ss, 0.0));
      if (opts.standardize) {
        if (!(sd > 0.0)) throw DegenerateColumn(static_cast<int>(j));
        cscale(j) = sd;
      } else {
        cscale(j) = 1.0;
      }
    }
    // standardized Gram: (G - ntr m m')/(ntr s s')
    Eigen::MatrixXd gs = gram_tr;
    gs.noalias() -= ntr * cmean * cmean.transpose();
    gs.array() /= (ntr * (cscale * cscale.transpose()).array());

    parallel_for(static_cast<int>(q), opts.threads, [&](int k) {
      if (!(pl[static_cast<size_t>(k)].lmax > 1e-300)) {
        if (f >= 0) mse_per_resp[static_cast<size_t>(k)].col(f).setZero();
        return;
      }
      const double ymean = opts.fit_intercept ? ysum_tr(k) / ntr : 0.0;
      Eigen::VectorXd c = (xty_tr.col(k) - colsum_tr * ymean).array() /
                          (ntr * cscale.array());
      bool conv = true;
      if (f >= 0) {
        solve_path_gram(gs, c, pl[static_cast<size_t>(k)].grid, opts, conv,
                        [&](Eigen::Index g, const Eigen::VectorXd& beta_std) {
                          double sse = 0.0;
                          for (size_t r = 0; r < test_rows.size(); ++r) {
                            double pred = ymean;
                            for (Eigen::Index j = 0; j < p; ++j) {
                              if (beta_std(j) == 0.0) continue;
                              pred += (xout(static_cast<Eigen::Index>(r), j) - cmean(j)) /
                                      cscale(j) * beta_std(j);
                            }
                            const double e = yout(static_cast<Eigen::Index>(r), k) - pred;
                            sse += e * e;
                          }
                          mse_per_resp[static_cast<size_t>(k)](g, f) =
                              sse / static_cast<double>(test_rows.size());
                        });
      }
    });
  };

  for (int f = 0; f < folds; ++f) {
    std::vector<int> test_rows;
    for (Eigen::Index i = 0; i < n; ++i)
      if (fold[static_cast<size_t>(i)] == f) test_rows.push_back(static_cast<int>(i));
    run_block(f, test_rows);
  }

  // final fits on the full data, shared full Gram
  Eigen::VectorXd cmean = opts.fit_intercept
                              ? Eigen::VectorXd(colsum_full / static_cast<double>(n))
                              : Eigen::VectorXd::Zero(p);
  Eigen::VectorXd cscale(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double ss = gram_full(j, j) / static_cast<double>(n) - cmean(j) * cmean(j);
    double sd = std::sqrt(std::max(ss, 0.0));
    if (opts.standardize) {
      if (!(sd > 0.0)) throw DegenerateColumn(static_cast<int>(j));
      cscale(j) = sd;
    } else {
      cscale(j) = 1.0;
    }
  }
  Eigen::MatrixXd gs = gram_full;
  gs.noalias() -= static_cast<double>(n) * cmean * cmean.transpose();
  gs.array() /= (static_cast<double>(n) * (cscale * cscale.transpose()).array());

  parallel_for(static_cast<int>(q), opts.threads, [&](int k) {
    LassoFit fit;
    if (!(pl[static_cast<size_t>(k)].lmax > 1e-300)) {
      fit = zero_fit(design, responses.col(k), opts);
      out.coef.row(k) = fit.coef.transpose();
      out.intercept(k) = fit.intercept;
      out.fits[static_cast<size_t>(k)] = std::move(fit);
      return;
    }
    const Eigen::VectorXd& grid = pl[static_cast<size_t>(k)].grid;
    const Eigen::MatrixXd& mse = mse_per_resp[static_cast<size_t>(k)];
    Eigen::VectorXd cvm = mse.rowwise().mean();
    Eigen::Index imin = 0;
    cvm.minCoeff(&imin);
    double se_min = 0.0;
    {
      double m = cvm(imin), s = 0.0;
      for (int f = 0; f < folds; ++f) s += (mse(imin, f) - m) * (mse(imin, f) - m);
      se_min = std::sqrt(s / std::max(folds - 1, 1)) / std::sqrt(static_cast<double>(folds));
    }
    Eigen::Index i1se = imin;
    for (Eigen::Index g = 0; g < grid.size(); ++g)
      if (cvm(g) <= cvm(imin) + se_min) {
        i1se = g;
        break;
      }
    const double ymean = opts.fit_intercept ? ysum_full(k) / static_cast<double>(n) : 0.0;
    Eigen::VectorXd c = (xty_full.col(k) - colsum_full * ymean).array() /
                        (static_cast<double>(n) * cscale.array());
    Eigen::VectorXd path = grid.head(i1se + 1);
    bool conv = true;
    Eigen::VectorXd beta_std;
    int passes = solve_path_gram(gs, c, path, opts, conv,
                                 [&](Eigen::Index g, const Eigen::VectorXd& b) {
                                   if (g == path.size() - 1) beta_std = b;
                                 });
    fit.coef = beta_std.array() / cscale.array();
    fit.intercept = ymean - cmean.dot(fit.coef);
    fit.lambda = grid(i1se);
    fit.converged = conv;
    fit.n_iter = passes;
    fit.residuals = responses.col(k) - design * fit.coef;
    fit.residuals.array() -= fit.intercept;
    for (Eigen::Index j = 0; j < fit.coef.size(); ++j)
      if (fit.coef(j) != 0.0) fit.active_set.push_back(static_cast<int>(j));
    out.coef.row(k) = fit.coef.transpose();
    out.intercept(k) = fit.intercept;
    out.fits[static_cast<size_t>(k)] = std::move(fit);
  });

  return out;
}

LassoFit hard_threshold(const LassoFit& fit, double level, const Eigen::MatrixXd& design,
                        const Eigen::VectorXd& response) {
  if (!(level >= 0.0)) throw DimensionMismatch("hard_threshold: level must be >= 0");
  LassoFit out = fit;
  out.active_set.clear();
  for (Eigen::Index j = 0; j < out.coef.size(); ++j) {
    if (std::abs(out.coef(j)) < level) out.coef(j) = 0.0;
    if (out.coef(j) != 0.0) out.active_set.push_back(static_cast<int>(j));
  }
  // intercept re-solved so residuals stay centered
  Eigen::VectorXd pred = design * out.coef;
  out.intercept = (response - pred).mean();
  out.residuals = response - pred;
  out.residuals.array() -= out.intercept;
  return out;
}

LassoFit ols_refit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                   const std::vector<int>& keep, bool fit_intercept) {
  const Eigen::Index n = design.rows();
  const auto k = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd z(n, k + (fit_intercept ? 1 : 0));
  if (fit_intercept) z.col(0).setOnes();
  for (Eigen::Index j = 0; j < k; ++j)
    z.col(j + (fit_intercept ? 1 : 0)) = design.col(keep[static_cast<size_t>(j)]);
  Eigen::VectorXd sol = z.colPivHouseholderQr().solve(response);

  LassoFit fit;
  fit.coef = Eigen::VectorXd::Zero(design.cols());
  fit.intercept = fit_intercept ? sol(0) : 0.0;
  for (Eigen::Index j = 0; j < k; ++j)
    fit.coef(keep[static_cast<size_t>(j)]) = sol(j + (fit_intercept ? 1 : 0));
  fit.lambda = 0.0;
  fit.residuals = response - design * fit.coef;
  fit.residuals.array() -= fit.intercept;
  fit.converged = true;
  for (Eigen::Index j = 0; j < fit.coef.size(); ++j)
    if (fit.coef(j) != 0.0) fit.active_set.push_back(static_cast<int>(j));
  return fit;
}

}  // namespace medfx
