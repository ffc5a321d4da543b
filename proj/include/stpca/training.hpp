#pragma once

#include "stpca/dataset.hpp"
#include "stpca/forecaster.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace stpca {

struct TrainConfig {
  double lr = 1e-3;
  int max_epochs = 200;
  int patience = 20;
  int batch_size = 32;
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 0;
  EmbeddingStrategy strategy = EmbeddingStrategy::adaptive;

  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_mae;
  int best_epoch = 0;  // 1-based
  double best_val_mae = std::numeric_limits<double>::infinity();
  std::string stop_reason;
  std::size_t skipped_batches = 0;

  /// `epoch,train_loss,val_mae` lines with a header.
  std::string to_csv() const;
};

struct LossResult {
  double loss = 0.0;
  Mat grad;  // d loss / d pred (normalized units)
  std::size_t valid = 0;  // unmasked cells
};

/// Masked MAE in original units. `pred` is normalized and de-normalized
/// internally. valid == 0 signals a fully masked batch (loss 0, grad 0).
LossResult masked_mae_loss(const Mat& pred, const Mat& target, const Normalizer& norm);

/// Bias-corrected Adam on one flat tensor. `step` is the 1-based timestep.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 long step, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Scales `grads` in place so that their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::span<const std::span<double>> grads, double max_norm);

class AdamState {
 public:
  explicit AdamState(const ModelParams& shape);
  /// Clips the trainable gradients to `clip_norm` and applies one Adam step.
  void step(ModelParams& params, ModelParams& grads, Trainable trainable, double lr, double clip_norm);
  long timestep() const { return t_; }

 private:
  ModelParams m_;
  ModelParams v_;
  long t_ = 0;
};

/// Patience-based early stopping on a validation metric.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  /// Records one epoch's value; returns true when training should stop.
  bool update(double value);
  bool improved() const { return improved_; }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int since_best_ = 0;
  bool improved_ = false;
  double best_ = std::numeric_limits<double>::infinity();
};

struct FitData {
  const TrafficSeries* series = nullptr;  // source of train windows
  const TrafficSeries* val_series = nullptr;  // defaults to `series`
  Normalizer normalizer;
  std::vector<Window> train;
  std::vector<Window> val;
};

struct FitResult {
  ModelParams best;
  TrainReport report;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, TrainReport report) : Error(what), report_(std::move(report)) {}
  const TrainReport& report() const { return report_; }

 private:
  TrainReport report_;
};

using EpochCallback = std::function<void(int epoch, double train_loss, double val_mae)>;

/// Micro-averaged masked MAE of `params` over `windows` (all horizons).
double masked_mae_over(const ModelParams& params, const TrafficSeries& series, const Normalizer& norm,
                       std::span<const Window> windows, std::size_t batch_size = 64);

FitResult fit(const ModelParams& init, const FitData& data, const TrainConfig& config, Trainable trainable,
              const EpochCallback& on_epoch = {});

}  // namespace stpca
