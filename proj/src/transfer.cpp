#include "stpca/transfer.hpp"

#include <charconv>
#include <cmath>
#include <optional>

namespace stpca {

namespace {

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string range_str(StepRange r) { return std::to_string(r.begin) + ":" + std::to_string(r.end); }

void check_no_leakage(const std::vector<Window>& windows, StepRange adaptation) {
  for (const auto& w : windows) {
    if (w.start < adaptation.end) throw Error("evaluation window overlaps the adaptation subset");
  }
}

}  // namespace

std::string_view to_string(TransferStrategy s) {
  switch (s) {
    case TransferStrategy::vanilla_adaptive: return "vanilla";
    case TransferStrategy::zero_emb: return "zero";
    case TransferStrategy::pca_emb: return "pca";
    case TransferStrategy::finetune_emb: return "finetune";
  }
  return "unknown";
}

TransferStrategy parse_transfer_strategy(std::string_view t) {
  if (t == "vanilla" || t == "vanilla_adaptive" || t == "adaptive") return TransferStrategy::vanilla_adaptive;
  if (t == "zero" || t == "zero_emb") return TransferStrategy::zero_emb;
  if (t == "pca" || t == "pca_emb") return TransferStrategy::pca_emb;
  if (t == "finetune" || t == "finetune_emb") return TransferStrategy::finetune_emb;
  throw UsageError("unknown transfer strategy '" + std::string(t) + "'");
}

void TransferPlan::validate() const {
  if (!(adaptation_fraction > 0.0 && adaptation_fraction <= 0.5)) {
    throw UsageError("adaptation fraction must lie in (0, 0.5]");
  }
}

AdaptationSplit adaptation_split(const TrafficSeries& target, double fraction) {
  const auto cut = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(target.total_steps())));
  auto adapt = day_aligned_prefix(target, {0, cut});
  if (adapt.empty()) {
    throw Error("adaptation subset of " + std::to_string(cut) + " steps lacks a full day of " +
                std::to_string(target.steps_per_day) + " slots");
  }
  return {adapt, {adapt.end, target.total_steps()}};
}

TrainConfig finetune_config(const TrainConfig& base) {
  TrainConfig c = base;
  c.max_epochs = 50;
  c.patience = 10;
  return c;
}

ModelParams adapt_model(const TrainedModel& model, const PcaProjection* source_proj, const TrafficSeries& target,
                        const TransferPlan& plan, const TrainConfig& train_cfg, bool cross_city) {
  plan.validate();
  const auto& cfg = model.params.config;
  if (target.steps_per_day != cfg.steps_per_day) {
    throw Error("target has T=" + std::to_string(target.steps_per_day) + " slots per day but the model was trained with T=" +
                std::to_string(cfg.steps_per_day));
  }
  if (!cross_city && target.num_nodes() != model.params.num_nodes()) {
    throw Error("cross-year plan needs the same nodes: model has N=" + std::to_string(model.params.num_nodes()) +
                ", target has N=" + std::to_string(target.num_nodes()));
  }
  const auto split = adaptation_split(target, plan.adaptation_fraction);
  ModelParams params = model.params;

  switch (plan.strategy) {
    case TransferStrategy::vanilla_adaptive:
      if (target.num_nodes() != params.num_nodes()) {
        throw Error("vanilla strategy keeps the trained embedding, which covers " +
                    std::to_string(params.num_nodes()) + " nodes, not " + std::to_string(target.num_nodes()));
      }
      break;
    case TransferStrategy::zero_emb:
      set_embedding(params, zero_embedding(target.num_nodes(), static_cast<std::size_t>(cfg.embed_dim)));
      break;
    case TransferStrategy::pca_emb: {
      if (!source_proj) throw Error("pca strategy needs the source projection");
      if (source_proj->slots() != static_cast<std::size_t>(target.steps_per_day)) {
        throw Error("projection expects T=" + std::to_string(source_proj->slots()) + " but target has T=" +
                    std::to_string(target.steps_per_day));
      }
      if (source_proj->dim() != static_cast<std::size_t>(cfg.embed_dim)) {
        throw Error("projection has C=" + std::to_string(source_proj->dim()) + " components but the model expects C_e=" +
                    std::to_string(cfg.embed_dim));
      }
      const Normalizer norm = cross_city ? fit_normalizer(target, split.adaptation) : model.normalizer;
      auto z = to_day_tensor(target, split.adaptation, norm);
      auto proj = plan.refit_projection
                      ? fit_projection(z, ComponentCount{source_proj->dim()}, source_proj->centered)
                      : *source_proj;
      auto table = refresh_embedding(z, proj);
      table.source.dataset = target.name;
      table.source.projection = plan.refit_projection ? "refit" : "source";
      set_embedding(params, std::move(table));
      break;
    }
    case TransferStrategy::finetune_emb: {
      if (target.num_nodes() != params.num_nodes()) throw Error("finetune strategy needs the trained node set");
      FitData data;
      data.series = &target;
      data.normalizer = model.normalizer;
      data.train = make_windows(target, split.adaptation, cfg.l1, cfg.l2);
      data.val = data.train;
      params = fit(params, data, finetune_config(train_cfg), Trainable::embedding_only).best;
      break;
    }
  }
  return params;
}

namespace {

HorizonReport run_protocol(const TrainedModel& model, const PcaProjection* proj, const TrafficSeries& target,
                           const TransferPlan& plan, const TrainConfig& train_cfg, const std::vector<int>& horizons,
                           bool cross_city, std::optional<StepRange> eval_range = std::nullopt) {
  const auto params = adapt_model(model, proj, target, plan, train_cfg, cross_city);
  auto split = adaptation_split(target, plan.adaptation_fraction);
  if (eval_range) split.evaluation = *eval_range;
  const auto& cfg = params.config;
  auto windows = make_windows(target, split.evaluation, cfg.l1, cfg.l2);
  check_no_leakage(windows, split.adaptation);
  auto report = evaluate(params, target, model.normalizer, windows, horizons);
  report.dataset = target.name;
  report.strategy = std::string(to_string(plan.strategy));
  report.seed = train_cfg.seed;
  report.metadata["protocol"] = cross_city ? "zero_shot" : eval_range ? "in_distribution" : "cross_year";
  report.metadata["source"] = plan.source;
  report.metadata["target"] = plan.target.empty() ? target.name : plan.target;
  report.metadata["adaptation_steps"] = range_str(split.adaptation);
  report.metadata["evaluation_steps"] = range_str(split.evaluation);
  report.metadata["adaptation_fraction"] = num(plan.adaptation_fraction);
  report.metadata["refit_projection"] = plan.refit_projection ? "true" : "false";
  report.metadata["source_normalizer"] = num(model.normalizer.mean) + "," + num(model.normalizer.std);
  if (plan.strategy == TransferStrategy::pca_emb) {
    const Normalizer emb = cross_city ? fit_normalizer(target, split.adaptation) : model.normalizer;
    report.metadata["embedding_normalizer"] = num(emb.mean) + "," + num(emb.std);
  }
  report.metadata["model_nodes"] = std::to_string(model.params.num_nodes());
  report.metadata["target_nodes"] = std::to_string(target.num_nodes());
  return report;
}

}  // namespace

HorizonReport cross_year_eval(const TrainedModel& model, const PcaProjection* source_proj,
                              const TrafficSeries& target, const TransferPlan& plan, const TrainConfig& train_cfg,
                              const std::vector<int>& horizons) {
  return run_protocol(model, source_proj, target, plan, train_cfg, horizons, false);
}

HorizonReport in_distribution_eval(const TrainedModel& model, const PcaProjection* source_proj,
                                   const TrafficSeries& series, StepRange evaluation, const TransferPlan& plan,
                                   const TrainConfig& train_cfg, const std::vector<int>& horizons) {
  return run_protocol(model, source_proj, series, plan, train_cfg, horizons, false, evaluation);
}

HorizonReport zero_shot_transfer(const TrainedModel& model, const PcaProjection& source_proj,
                                 const TrafficSeries& target, const TransferPlan& plan,
                                 const std::vector<int>& horizons) {
  if (plan.strategy == TransferStrategy::finetune_emb) throw Error("zero-shot transfer performs no training");
  return run_protocol(model, &source_proj, target, plan, TrainConfig{}, horizons, true);
}

HorizonReport historical_average_baseline(const TrafficSeries& target, StepRange adaptation, StepRange evaluation,
                                          int l1, int l2, const std::vector<int>& horizons) {
  auto days = day_aligned_prefix(target, adaptation);
  if (adaptation.empty() || days.empty()) throw Error("historical average needs a full day of adaptation data");
  if (adaptation.overlaps(evaluation)) throw Error("adaptation and evaluation ranges overlap");
  const auto t = static_cast<std::size_t>(target.steps_per_day);
  const auto n = static_cast<Eigen::Index>(target.num_nodes());
  Mat sum = Mat::Zero(static_cast<Eigen::Index>(t), n);
  Mat count = Mat::Zero(static_cast<Eigen::Index>(t), n);
  for (std::size_t s = days.begin; s < days.end; ++s) {
    const auto slot = target.slot_of(s);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = target.values(static_cast<Eigen::Index>(s), j);
      if (v == 0.0) continue;
      sum(slot, j) += v;
      count(slot, j) += 1.0;
    }
  }
  Mat profile = (count.array() > 0.0).select(sum.array() / count.array().max(1.0), 0.0);

  auto windows = make_windows(target, evaluation, l1, l2);
  const auto rows = static_cast<Eigen::Index>(windows.size()) * n;
  Mat pred(rows, l2);
  Mat truth(rows, l2);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    for (int k = 0; k < l2; ++k) {
      const std::size_t step = windows[w].start + static_cast<std::size_t>(l1 + k);
      const auto slot = target.slot_of(step);
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto row = static_cast<Eigen::Index>(w) * n + j;
        pred(row, k) = profile(slot, j);
        truth(row, k) = target.values(static_cast<Eigen::Index>(step), j);
      }
    }
  }
  auto report = score_predictions(pred, truth, l2, horizons);
  report.dataset = target.name;
  report.strategy = "historical_average";
  report.metadata["adaptation_steps"] = range_str(adaptation);
  report.metadata["evaluation_steps"] = range_str(evaluation);
  return report;
}

}  // namespace stpca
