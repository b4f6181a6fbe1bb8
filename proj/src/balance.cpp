#include "medfx/balance.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace medfx {

BalanceProblem BalanceProblem::make(Eigen::MatrixXd design, Eigen::VectorXd contrast,
                                    double K) {
  BalanceProblem p;
  p.design = std::move(design);
  p.contrast = std::move(contrast);
  p.K = K;
  p.cap = std::pow(static_cast<double>(p.design.rows()), -2.0 / 3.0);
  if (p.design.cols() != p.contrast.size())
    throw DimensionMismatch("balance: contrast length must match design columns");
  return p;
}

double BalanceProblem::slack() const {
  return K * std::sqrt(std::log(static_cast<double>(d())) /
                       static_cast<double>(n_g()));
}

StillInfeasible::StillInfeasible(std::vector<EscalationAttempt> attempts)
    : std::runtime_error([&attempts] {
        std::ostringstream os;
        os << "balancing weights infeasible after " << attempts.size() << " attempts;";
        for (const auto& a : attempts) os << " K=" << a.K << " resid=" << a.residual_inf;
        return os.str();
      }()),
      log(std::move(attempts)) {}

namespace {

inline Eigen::VectorXd clip_box(const Eigen::VectorXd& x, double cap) {
  return x.cwiseMax(-cap).cwiseMin(cap);
}

inline Eigen::VectorXd clip_ball(const Eigen::VectorXd& x, const Eigen::VectorXd& center,
                                 double radius) {
  Eigen::VectorXd lo = center.array() - radius;
  Eigen::VectorXd hi = center.array() + radius;
  return x.cwiseMax(lo).cwiseMin(hi);
}

// Euclidean projection onto the l1 ball of given radius.
Eigen::VectorXd project_l1(const Eigen::VectorXd& x, double radius) {
  if (x.lpNorm<1>() <= radius) return x;
  std::vector<double> mag(static_cast<size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) mag[static_cast<size_t>(i)] = std::abs(x(i));
  std::sort(mag.begin(), mag.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (size_t k = 0; k < mag.size(); ++k) {
    cum += mag[k];
    double t = (cum - radius) / static_cast<double>(k + 1);
    if (k + 1 == mag.size() || t >= mag[k + 1]) {
      theta = t;
      break;
    }
  }
  Eigen::VectorXd out = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double m = std::abs(x(i)) - theta;
    out(i) = m > 0.0 ? (x(i) > 0 ? m : -m) : 0.0;
  }
  return out;
}

struct AffineProjector {
  const Eigen::MatrixXd& a;  // n x d
  Eigen::LLT<Eigen::MatrixXd> llt;

  explicit AffineProjector(const Eigen::MatrixXd& design) : a(design) {
    Eigen::MatrixXd gram =
        Eigen::MatrixXd::Identity(design.rows(), design.rows()) + design * design.transpose();
    llt.compute(gram);
  }

  // project (t0, z0) onto {(t, z): z = a' t}
  void project(const Eigen::VectorXd& t0, const Eigen::VectorXd& z0, Eigen::VectorXd& t,
               Eigen::VectorXd& z) const {
    t = llt.solve(t0 + a * z0);
    z.noalias() = a.transpose() * t;
  }
};

struct AdmmState {
  Eigen::VectorXd vt, vz;  // prox block
  Eigen::VectorXd wt, wz;  // affine block
  Eigen::VectorXd ut, uz;  // scaled duals
  double rho = 1.0;
};

double eval_resid_inf(const Eigen::MatrixXd& a, const Eigen::VectorXd& c,
                      const Eigen::VectorXd& tau) {
  return (c - a.transpose() * tau).lpNorm<Eigen::Infinity>();
}

// Lagrange dual value of the QP at multiplier y (for the z = A' tau block):
//   g(y) = y'c - slack ||y||_1 - sum_i h_cap((A y)_i)
// with h_cap(v) = v^2/4 on |v| <= 2 cap and cap |v| - cap^2 beyond; any y gives
// a lower bound on the optimal ||tau||^2, which certifies near-optimality.
double dual_value(const BalanceProblem& pb, double slack, const Eigen::VectorXd& y) {
  Eigen::VectorXd ay = pb.design * y;
  double h = 0.0;
  for (Eigen::Index i = 0; i < ay.size(); ++i) {
    double v = std::abs(ay(i));
    h += v <= 2.0 * pb.cap ? v * v / 4.0 : pb.cap * v - pb.cap * pb.cap;
  }
  return y.dot(pb.contrast) - slack * y.lpNorm<1>() - h;
}

// Exact solve on the active set identified by ADMM. Box-active coordinates are
// pinned at +-cap, ball-active rows become equalities; the free block is the
// classical minimum-norm solution. Returns false when the polished point is
// not feasible or does not improve the objective.
bool polish(const BalanceProblem& pb, double slack, const AdmmState& st,
            Eigen::VectorXd& tau_out) {
  const double cap = pb.cap;
  const Eigen::Index n = pb.n_g(), d = pb.d();
  const double tol_act = 1e-5;

  std::vector<int> fixed, free_idx;
  Eigen::VectorXd tau_fixed = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(st.wt(i)) >= cap * (1.0 - tol_act)) {
      fixed.push_back(static_cast<int>(i));
      tau_fixed(i) = st.wt(i) > 0 ? cap : -cap;
    } else {
      free_idx.push_back(static_cast<int>(i));
    }
  }
  std::vector<int> eq;
  std::vector<double> eq_rhs;
  for (Eigen::Index j = 0; j < d; ++j) {
    double r = pb.contrast(j) - st.wz(j);
    if (std::abs(r) >= slack * (1.0 - tol_act) - 1e-14) {
      eq.push_back(static_cast<int>(j));
      double target = pb.contrast(j) - (r >= 0 ? slack : -slack);
      double rhs = target;
      for (int i : fixed) rhs -= pb.design(i, j) * tau_fixed(i);
      eq_rhs.push_back(rhs);
    }
  }

  Eigen::VectorXd tau = tau_fixed;
  const auto nf = static_cast<Eigen::Index>(free_idx.size());
  const auto ne = static_cast<Eigen::Index>(eq.size());
  if (ne > 0 && nf > 0) {
    Eigen::MatrixXd e(ne, nf);
    for (Eigen::Index r = 0; r < ne; ++r)
      for (Eigen::Index ci = 0; ci < nf; ++ci)
        e(r, ci) = pb.design(free_idx[static_cast<size_t>(ci)], eq[static_cast<size_t>(r)]);
    Eigen::VectorXd rhs(ne);
    for (Eigen::Index r = 0; r < ne; ++r) rhs(r) = eq_rhs[static_cast<size_t>(r)];
    Eigen::MatrixXd gram = e * e.transpose();
    gram.diagonal().array() += 1e-12 * (1.0 + gram.diagonal().maxCoeff());
    Eigen::VectorXd lam = gram.ldlt().solve(rhs);
    Eigen::VectorXd tf = e.transpose() * lam;
    for (Eigen::Index ci = 0; ci < nf; ++ci) tau(free_idx[static_cast<size_t>(ci)]) = tf(ci);
  } else if (ne > 0 && nf == 0) {
    // nothing free to adjust; feasibility check below decides
  }

  const double feas_eps = 1e-9;
  if (tau.lpNorm<Eigen::Infinity>() > cap + feas_eps) return false;
  if (eval_resid_inf(pb.design, pb.contrast, tau) > slack + feas_eps) return false;
  double obj_admm = st.wt.squaredNorm();
  if (tau.squaredNorm() > obj_admm + 1e-6 * (1.0 + obj_admm)) return false;
  tau_out = tau;
  return true;
}

}  // namespace

double min_inf_residual(const BalanceProblem& pb, int max_iter) {
  const Eigen::Index n = pb.n_g(), d = pb.d();
  AffineProjector proj(pb.design);
  Eigen::VectorXd vt = Eigen::VectorXd::Zero(n), vz = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd wt = vt, wz = vz, ut = vt, uz = vz;
  double rho = 1.0;
  const double eps = 1e-9;
  for (int it = 0; it < max_iter; ++it) {
    vt = clip_box(wt - ut, pb.cap);
    Eigen::VectorXd q = pb.contrast - (wz - uz);
    vz = pb.contrast - (q - (1.0 / rho) * project_l1(rho * q, 1.0));
    Eigen::VectorXd wt_prev = wt;
    proj.project(vt + ut, vz + uz, wt, wz);
    ut += vt - wt;
    uz += vz - wz;
    double r = std::sqrt((vt - wt).squaredNorm() + (vz - wz).squaredNorm());
    double s = rho * (wt - wt_prev).norm();
    double sc = std::sqrt(static_cast<double>(n + d));
    if (r <= sc * eps + 1e-7 * std::max(vt.norm() + vz.norm(), wt.norm() + wz.norm()) &&
        s <= sc * eps + 1e-7 * rho * (ut.norm() + uz.norm()))
      break;
  }
  return eval_resid_inf(pb.design, pb.contrast, clip_box(wt, pb.cap));
}

BalanceWeights solve_weights(const BalanceProblem& pb, const BalanceSolveOptions& opts) {
  const Eigen::Index n = pb.n_g(), d = pb.d();
  if (n < 1 || d < 1) throw DimensionMismatch("balance: empty problem");
  const double slack = pb.slack();
  const double cap = pb.cap;

  BalanceWeights out;
  out.K_used = pb.K;

  // zero is optimal whenever it is feasible
  const double c_inf = pb.contrast.lpNorm<Eigen::Infinity>();
  if (c_inf <= slack) {
    out.tau = Eigen::VectorXd::Zero(n);
    out.achieved_residual_inf = c_inf;
    out.achieved_cap_inf = 0.0;
    out.objective = 0.0;
    out.status = BalanceStatus::optimal;
    return out;
  }

  // cheap certificate: even spending the whole cap on every unit cannot
  // reproduce coordinate j beyond cap * ||column j||_1
  {
    double lb = 0.0;
    for (Eigen::Index j = 0; j < d; ++j)
      lb = std::max(lb, std::abs(pb.contrast(j)) - cap * pb.design.col(j).lpNorm<1>());
    if (lb > slack * (1.0 + 1e-12) + 1e-15) {
      out.tau = Eigen::VectorXd::Zero(n);
      out.achieved_residual_inf = c_inf;
      out.status = BalanceStatus::infeasible;
      out.infeasibility_certificate = lb;
      return out;
    }
  }

  AffineProjector proj(pb.design);
  AdmmState st;
  st.vt = Eigen::VectorXd::Zero(n);
  st.vz = Eigen::VectorXd::Zero(d);
  st.wt = st.vt;
  st.wz = st.vz;
  st.ut = st.vt;
  st.uz = st.vz;

  const double alpha = opts.over_relax;
  const double sc = std::sqrt(static_cast<double>(n + d));
  int it = 0;
  double stall_resid = -1.0;
  int stall_count = 0;
  double tol_scale = 1.0;
  bool converged = false;

  while (it < opts.max_iter) {
    ++it;
    st.vt = clip_box(st.rho * (st.wt - st.ut) / (2.0 + st.rho), cap);
    st.vz = clip_ball(st.wz - st.uz, pb.contrast, slack);

    Eigen::VectorXd xt = alpha * st.vt + (1.0 - alpha) * st.wt;
    Eigen::VectorXd xz = alpha * st.vz + (1.0 - alpha) * st.wz;
    Eigen::VectorXd wt_prev = st.wt;
    proj.project(xt + st.ut, xz + st.uz, st.wt, st.wz);
    st.ut += xt - st.wt;
    st.uz += xz - st.wz;

    const double rn = std::sqrt((st.vt - st.wt).squaredNorm() + (st.vz - st.wz).squaredNorm());
    const double sn = st.rho * (st.wt - wt_prev).norm();
    const double eps_pri = sc * opts.tol_primal * tol_scale +
                           opts.tol_primal * tol_scale *
                               std::max(st.vt.norm() + st.vz.norm(), st.wt.norm() + st.wz.norm());
    const double eps_dua = sc * opts.tol_dual * tol_scale +
                           opts.tol_dual * tol_scale * st.rho * (st.ut.norm() + st.uz.norm());

    if (rn <= eps_pri && sn <= eps_dua) {
      const double lower = std::max(dual_value(pb, slack, st.rho * st.uz),
                                    dual_value(pb, slack, -st.rho * st.uz));
      double best_obj = std::numeric_limits<double>::infinity();
      Eigen::VectorXd best;
      Eigen::VectorXd polished;
      if (polish(pb, slack, st, polished)) {
        best = polished;
        best_obj = polished.squaredNorm();
      }
      Eigen::VectorXd cand = clip_box(st.vt, cap);
      if (eval_resid_inf(pb.design, pb.contrast, cand) <= slack + 1e-9 &&
          cand.squaredNorm() < best_obj) {
        best = cand;
        best_obj = cand.squaredNorm();
      }
      const double gap_tol = std::max(1e-5, 1e-6 * (1.0 + std::abs(lower)));
      if (best.size() > 0 && best_obj - lower <= gap_tol) {
        out.tau = best;
        converged = true;
        break;
      }
      if (tol_scale <= 1e-6) {
        if (best.size() > 0) {
          out.tau = best;  // feasible, gap not certified at this precision
          converged = true;
        }
        break;
      }
      tol_scale *= 1e-2;
      continue;
    }

    // infeasible problems: dual settles while the primal gap stalls
    if (it % 100 == 0) {
      if (stall_resid >= 0.0 && rn > 1e3 * eps_pri && sn <= 10.0 * eps_dua &&
          std::abs(rn - stall_resid) <= 1e-4 * stall_resid) {
        if (++stall_count >= 5) break;
      } else {
        stall_count = 0;
      }
      stall_resid = rn;
    }
    if (it % 25 == 0) {
      if (rn > 10.0 * sn && st.rho < 1e6) {
        st.rho *= 2.0;
        st.ut /= 2.0;
        st.uz /= 2.0;
      } else if (sn > 10.0 * rn && st.rho > 1e-6) {
        st.rho /= 2.0;
        st.ut *= 2.0;
        st.uz *= 2.0;
      }
    }
  }

  out.iterations = it;
  if (converged) {
    out.status = BalanceStatus::optimal;
  } else {
    // distinguish genuine infeasibility from slow convergence
    double best = min_inf_residual(pb);
    if (best > slack * (1.0 + 1e-9) + 1e-12) {
      out.status = BalanceStatus::infeasible;
      out.infeasibility_certificate = best;
      out.tau = Eigen::VectorXd::Zero(n);
      out.achieved_residual_inf = c_inf;
      return out;
    }
    out.status = BalanceStatus::max_iter;
    out.tau = clip_box(st.wt, cap);
  }
  out.achieved_residual_inf = eval_resid_inf(pb.design, pb.contrast, out.tau);
  out.achieved_cap_inf = out.tau.lpNorm<Eigen::Infinity>();
  out.objective = out.tau.squaredNorm();
  return out;
}

std::pair<BalanceWeights, std::vector<EscalationAttempt>> solve_with_escalation(
    const BalanceProblem& problem, const BalanceSolveOptions& opts,
    const EscalationOptions& esc) {
  if (!(esc.factor > 1.0)) throw DimensionMismatch("escalation factor must exceed 1");
  std::vector<EscalationAttempt> log;
  BalanceProblem pb = problem;
  double known_min_resid = -1.0;
  for (int attempt = 0; attempt < esc.max_attempts; ++attempt) {
    EscalationAttempt rec;
    rec.K = pb.K;
    // the attainable inf-residual does not depend on K; skip doomed attempts
    if (known_min_resid >= 0.0 && pb.slack() < known_min_resid) {
      rec.status = BalanceStatus::infeasible;
      rec.residual_inf = known_min_resid;
      log.push_back(rec);
      pb.K *= esc.factor;
      continue;
    }
    BalanceWeights w = solve_weights(pb, opts);
    rec.status = w.status;
    rec.residual_inf = w.status == BalanceStatus::infeasible ? w.infeasibility_certificate
                                                             : w.achieved_residual_inf;
    log.push_back(rec);
    if (w.status == BalanceStatus::optimal || w.status == BalanceStatus::max_iter)
      return {std::move(w), std::move(log)};
    known_min_resid = std::max(known_min_resid, w.infeasibility_certificate);
    pb.K *= esc.factor;
  }
  throw StillInfeasible(std::move(log));
}

Eigen::VectorXd oracle_weights(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& mu,
                               const Eigen::VectorXd& contrast,
                               const Eigen::MatrixXd& design) {
  if (sigma.rows() != sigma.cols() || sigma.rows() != contrast.size() ||
      mu.size() != contrast.size() || design.cols() != contrast.size())
    throw DimensionMismatch("oracle_weights: inconsistent dimensions");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw SingularSigma();
  Eigen::VectorXd dir = llt.solve(contrast);
  const auto n = static_cast<double>(design.rows());
  Eigen::VectorXd tau(design.rows());
  for (Eigen::Index i = 0; i < design.rows(); ++i)
    tau(i) = (design.row(i).transpose() - mu).dot(dir) / n;
  return tau;
}

}  // namespace medfx
