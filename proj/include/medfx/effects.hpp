#pragma once

#include <optional>
#include <vector>

#include "medfx/pipeline.hpp"

namespace medfx {

struct EffectInterval {
  double estimate = 0.0;
  double se = 0.0;  // sqrt of summed component variances; heuristic, the four
                    // pipeline runs share data
  double ci_lo = 0.0, ci_hi = 0.0;
};

struct BootstrapRecord {
  int requested = 0;
  int used = 0;
  int failed = 0;
  double level = 0.95;
  std::vector<double> nie, nde, ate;  // per-replicate estimates
  double nie_mean = 0.0, nde_mean = 0.0, ate_mean = 0.0;
  double nie_lo = 0.0, nie_hi = 0.0;
  double nde_lo = 0.0, nde_hi = 0.0;
  double ate_lo = 0.0, ate_hi = 0.0;
};

struct EffectsReport {
  MediationEstimate ey11, ey00, ey10, ey01;
  EffectInterval nie;  // ey11 - ey10
  EffectInterval nde;  // ey10 - ey00
  EffectInterval ate;  // nie + nde
  std::optional<BootstrapRecord> bootstrap;
};

// Pipeline run targeting E[Y^(a_outcome, M^(a_mediator))]; (1,0) is exactly
// estimate_debiased.
MediationEstimate counterfactual_mean(const Dataset& data, int a_outcome, int a_mediator,
                                      const PipelineConfig& cfg);

EffectsReport effects(const Dataset& data, const PipelineConfig& cfg);

// Nonparametric row resampling; replicates that fail (e.g. a resample loses
// one treatment arm) are counted and excluded.
BootstrapRecord bootstrap_effects(const Dataset& data, const PipelineConfig& cfg, int B,
                                  double level);

}  // namespace medfx
