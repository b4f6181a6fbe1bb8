#include "medfx/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "medfx/rng.hpp"

namespace medfx {

ValidationReport validate(const Dataset& data) {
  ValidationReport rep;
  const Eigen::Index n = data.X.rows();
  if (data.M.rows() != n) rep.fail("M has " + std::to_string(data.M.rows()) + " rows, X has " + std::to_string(n));
  if (data.A.size() != n) rep.fail("A has " + std::to_string(data.A.size()) + " entries, X has " + std::to_string(n) + " rows");
  if (data.Y.size() != n) rep.fail("Y has " + std::to_string(data.Y.size()) + " entries, X has " + std::to_string(n) + " rows");

  auto scan_matrix = [&rep](const Eigen::MatrixXd& m, const char* name) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        if (!std::isfinite(m(i, j))) {
          rep.fail(std::string("non-finite ") + name + " at row " + std::to_string(i) + ", column " + std::to_string(j));
          return;
        }
  };
  scan_matrix(data.X, "X");
  scan_matrix(data.M, "M");
  for (Eigen::Index i = 0; i < data.Y.size(); ++i)
    if (!std::isfinite(data.Y(i))) {
      rep.fail("non-finite Y at row " + std::to_string(i));
      break;
    }

  int n0 = 0, n1 = 0;
  for (Eigen::Index i = 0; i < data.A.size(); ++i) {
    if (data.A(i) == 0) ++n0;
    else if (data.A(i) == 1) ++n1;
    else {
      rep.fail("non-binary treatment at row " + std::to_string(i));
      return rep;
    }
  }
  if (data.A.size() > 0) {
    if (n0 == 0) rep.fail("control group is empty");
    if (n1 == 0) rep.fail("treated group is empty");
  }
  return rep;
}

GroupView group_view(const Dataset& data, int a) {
  GroupView g;
  for (Eigen::Index i = 0; i < data.A.size(); ++i)
    if (data.A(i) == a) g.indices.push_back(static_cast<int>(i));
  g.n_g = static_cast<int>(g.indices.size());
  g.X_g.resize(g.n_g, data.X.cols());
  g.M_g.resize(g.n_g, data.M.cols());
  g.Y_g.resize(g.n_g);
  for (int r = 0; r < g.n_g; ++r) {
    g.X_g.row(r) = data.X.row(g.indices[static_cast<size_t>(r)]);
    g.M_g.row(r) = data.M.row(g.indices[static_cast<size_t>(r)]);
    g.Y_g(r) = data.Y(g.indices[static_cast<size_t>(r)]);
  }
  return g;
}

SplitPlan split(const Dataset& data, uint64_t seed) {
  const int n = static_cast<int>(data.n());
  int counts[2] = {0, 0};
  for (Eigen::Index i = 0; i < data.A.size(); ++i) counts[data.A(i) == 1 ? 1 : 0]++;
  for (int a = 0; a < 2; ++a)
    if (counts[a] < 4)
      throw GroupTooSmall("treatment group " + std::to_string(a) + " has " +
                          std::to_string(counts[a]) + " rows; need at least 4 to split");

  Rng rng(derive_seed(seed, 1));
  SplitPlan plan;
  plan.seed = seed;
  std::vector<int> perm = rng.permutation(n);
  for (int a = 0; a < 2; ++a) {
    std::vector<int> members;
    for (int idx : perm)
      if (data.A(idx) == a) members.push_back(idx);
    const int half = (static_cast<int>(members.size()) + 1) / 2;  // odd row goes to fold1
    for (int r = 0; r < static_cast<int>(members.size()); ++r)
      (r < half ? plan.fold1 : plan.fold2).push_back(members[static_cast<size_t>(r)]);
  }
  std::sort(plan.fold1.begin(), plan.fold1.end());
  std::sort(plan.fold2.begin(), plan.fold2.end());
  return plan;
}

Dataset subset(const Dataset& data, const std::vector<int>& rows) {
  Dataset out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.X.resize(m, data.X.cols());
  out.M.resize(m, data.M.cols());
  out.A.resize(m);
  out.Y.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    out.X.row(r) = data.X.row(rows[static_cast<size_t>(r)]);
    out.M.row(r) = data.M.row(rows[static_cast<size_t>(r)]);
    out.A(r) = data.A(rows[static_cast<size_t>(r)]);
    out.Y(r) = data.Y(rows[static_cast<size_t>(r)]);
  }
  return out;
}

void TrueParams::check_consistent() const {
  const Eigen::Index np = p(), nq = q();
  if (beta0.size() != np || beta1.size() != np) throw DimensionMismatch("beta dimensions disagree");
  if (gamma0.size() != nq || gamma1.size() != nq) throw DimensionMismatch("gamma dimensions disagree");
  if (delta0.size() != nq || delta1.size() != nq) throw DimensionMismatch("delta dimensions disagree");
  if (B0.rows() != nq || B0.cols() != np || B1.rows() != nq || B1.cols() != np)
    throw DimensionMismatch("B matrices must be q x p");
  if (!(sigma_eps > 0.0) || !(sigma_u > 0.0)) throw DimensionMismatch("noise scales must be positive");
}

}  // namespace medfx
