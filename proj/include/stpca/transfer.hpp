#pragma once

#include "stpca/dataset.hpp"
#include "stpca/forecaster.hpp"
#include "stpca/metrics.hpp"
#include "stpca/pca.hpp"
#include "stpca/training.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace stpca {

enum class TransferStrategy { vanilla_adaptive, zero_emb, pca_emb, finetune_emb };

std::string_view to_string(TransferStrategy s);
/// Accepts vanilla, zero, pca, finetune (and the *_emb / vanilla_adaptive spellings).
TransferStrategy parse_transfer_strategy(std::string_view text);

struct TransferPlan {
  std::string source;
  std::string target;
  double adaptation_fraction = 0.05;
  TransferStrategy strategy = TransferStrategy::pca_emb;
  bool refit_projection = false;

  void validate() const;
};

/// Leading adaptation subset and the evaluation steps after it.
struct AdaptationSplit {
  StepRange adaptation;
  StepRange evaluation;
};

/// Adaptation = the first `fraction` of the target's steps, cut back to the
/// last day boundary; evaluation = everything after it.
AdaptationSplit adaptation_split(const TrafficSeries& target, double fraction);

/// Fine-tuning budget for finetune_emb: the training optimizer settings with
/// at most 50 epochs and patience 10.
TrainConfig finetune_config(const TrainConfig& base);

/// Parameters the protocol evaluates with. `cross_city` selects the target's
/// own adaptation normalizer for the PCA day tensor and allows a different
/// node count.
ModelParams adapt_model(const TrainedModel& model, const PcaProjection* source_proj, const TrafficSeries& target,
                        const TransferPlan& plan, const TrainConfig& train_cfg, bool cross_city);

/// Same sensors, later period.
HorizonReport cross_year_eval(const TrainedModel& model, const PcaProjection* source_proj,
                              const TrafficSeries& target, const TransferPlan& plan,
                              const TrainConfig& train_cfg = {}, const std::vector<int>& horizons = kDefaultHorizons);

/// Same embedding treatment as cross_year_eval, with the adaptation subset
/// taken from `series` itself and scoring restricted to `evaluation`
/// (typically the test split). Windows reaching into the adaptation subset
/// are rejected.
HorizonReport in_distribution_eval(const TrainedModel& model, const PcaProjection* source_proj,
                                   const TrafficSeries& series, StepRange evaluation, const TransferPlan& plan,
                                   const TrainConfig& train_cfg = {},
                                   const std::vector<int>& horizons = kDefaultHorizons);

/// Different node set, no weight updates; only the embedding is recomputed.
HorizonReport zero_shot_transfer(const TrainedModel& model, const PcaProjection& source_proj,
                                 const TrafficSeries& target, const TransferPlan& plan,
                                 const std::vector<int>& horizons = kDefaultHorizons);

/// Per-node, per-slot mean of the nonzero adaptation readings, scored on the
/// windows of `evaluation`.
HorizonReport historical_average_baseline(const TrafficSeries& target, StepRange adaptation, StepRange evaluation,
                                          int l1, int l2, const std::vector<int>& horizons = kDefaultHorizons);

}  // namespace stpca
