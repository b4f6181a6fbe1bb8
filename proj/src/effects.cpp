#include "medfx/effects.hpp"

#include <cmath>

#include "medfx/rng.hpp"
#include "medfx/stats.hpp"
#include "medfx/threadpool.hpp"

namespace medfx {

MediationEstimate counterfactual_mean(const Dataset& data, int a_outcome, int a_mediator,
                                      const PipelineConfig& cfg) {
  if ((a_outcome != 0 && a_outcome != 1) || (a_mediator != 0 && a_mediator != 1))
    throw DimensionMismatch("counterfactual_mean: arms must be 0 or 1");
  return estimate_core(data, a_outcome, a_mediator, cfg);
}

namespace {

EffectInterval difference(const MediationEstimate& a, const MediationEstimate& b,
                          double level) {
  EffectInterval d;
  d.estimate = a.theta_hat - b.theta_hat;
  d.se = std::sqrt(a.se * a.se + b.se * b.se);
  const double z = z_quantile(level);
  d.ci_lo = d.estimate - z * d.se;
  d.ci_hi = d.estimate + z * d.se;
  return d;
}

}  // namespace

EffectsReport effects(const Dataset& data, const PipelineConfig& cfg) {
  EffectsReport rep;
  rep.ey11 = counterfactual_mean(data, 1, 1, cfg);
  rep.ey00 = counterfactual_mean(data, 0, 0, cfg);
  rep.ey10 = counterfactual_mean(data, 1, 0, cfg);
  rep.ey01 = counterfactual_mean(data, 0, 1, cfg);
  rep.nie = difference(rep.ey11, rep.ey10, cfg.level);
  rep.nde = difference(rep.ey10, rep.ey00, cfg.level);
  rep.ate = difference(rep.ey11, rep.ey00, cfg.level);
  return rep;
}

BootstrapRecord bootstrap_effects(const Dataset& data, const PipelineConfig& cfg, int B,
                                  double level) {
  if (B < 50) throw DimensionMismatch("bootstrap_effects: need B >= 50");
  BootstrapRecord rec;
  rec.requested = B;
  rec.level = level;

  const int n = static_cast<int>(data.n());
  struct Rep {
    bool ok = false;
    double nie = 0.0, nde = 0.0, ate = 0.0;
  };
  std::vector<Rep> reps(static_cast<size_t>(B));

  parallel_for(B, cfg.threads, [&](int bi) {
    Rng rng(derive_seed(cfg.seed, 1000 + static_cast<uint64_t>(bi)));
    std::vector<int> rows(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) rows[static_cast<size_t>(i)] = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
    try {
      Dataset resampled = subset(data, rows);
      PipelineConfig pc = cfg;
      pc.seed = derive_seed(cfg.seed, 2000 + static_cast<uint64_t>(bi));
      pc.threads = 1;
      MediationEstimate ey11 = counterfactual_mean(resampled, 1, 1, pc);
      MediationEstimate ey00 = counterfactual_mean(resampled, 0, 0, pc);
      MediationEstimate ey10 = counterfactual_mean(resampled, 1, 0, pc);
      Rep r;
      r.ok = true;
      r.nie = ey11.theta_hat - ey10.theta_hat;
      r.nde = ey10.theta_hat - ey00.theta_hat;
      r.ate = ey11.theta_hat - ey00.theta_hat;
      reps[static_cast<size_t>(bi)] = r;
    } catch (const std::exception&) {
      reps[static_cast<size_t>(bi)].ok = false;
    }
  });

  for (const auto& r : reps) {
    if (!r.ok) {
      ++rec.failed;
      continue;
    }
    rec.nie.push_back(r.nie);
    rec.nde.push_back(r.nde);
    rec.ate.push_back(r.ate);
  }
  rec.used = static_cast<int>(rec.nie.size());
  if (rec.failed * 5 > B) throw TooManyFailures(rec.failed, B);

  auto summarize = [level](const std::vector<double>& x, double& m, double& lo, double& hi) {
    m = 0.0;
    for (double xi : x) m += xi;
    m /= static_cast<double>(x.size());
    const double tail = (1.0 - level) / 2.0;
    lo = order_quantile(x, tail);
    hi = order_quantile(x, 1.0 - tail);
  };
  summarize(rec.nie, rec.nie_mean, rec.nie_lo, rec.nie_hi);
  summarize(rec.nde, rec.nde_mean, rec.nde_lo, rec.nde_hi);
  summarize(rec.ate, rec.ate_mean, rec.ate_lo, rec.ate_hi);
  return rec;
}

}  // namespace medfx
