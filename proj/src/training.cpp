#include "stpca/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace stpca {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || max_epochs < 1 || patience < 1 || batch_size < 1 || !(grad_clip_norm > 0.0)) {
    throw UsageError("training config: lr, max_epochs, patience, batch_size and grad_clip_norm must be positive");
  }
  if (patience > max_epochs) throw UsageError("training config: patience exceeds max_epochs");
}

std::string TrainReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_loss,val_mae\n";
  for (std::size_t i = 0; i < train_loss.size(); ++i) out << i + 1 << ',' << train_loss[i] << ',' << val_mae[i] << '\n';
  return out.str();
}

LossResult masked_mae_loss(const Mat& pred, const Mat& target, const Normalizer& norm) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw Error("loss: shape mismatch");
  LossResult r;
  r.grad = Mat::Zero(pred.rows(), pred.cols());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double y = target.data()[i];
    if (y == 0.0) continue;
    const double diff = norm.invert(pred.data()[i]) - y;
    sum += std::abs(diff);
    r.grad.data()[i] = diff > 0.0 ? norm.std : (diff < 0.0 ? -norm.std : 0.0);
    ++r.valid;
  }
  if (r.valid == 0) return r;
  r.loss = sum / static_cast<double>(r.valid);
  r.grad /= static_cast<double>(r.valid);
  return r;
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 long step, double lr, double beta1, double beta2, double eps) {
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

double clip_global_norm(std::span<const std::span<double>> grads, double max_norm) {
  double sq = 0.0;
  for (auto g : grads) {
    for (double x : g) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto g : grads) {
      for (double& x : g) x *= scale;
    }
  }
  return norm;
}

AdamState::AdamState(const ModelParams& shape) : m_(zeros_like(shape)), v_(zeros_like(shape)) {}

void AdamState::step(ModelParams& params, ModelParams& grads, Trainable trainable, double lr, double clip_norm) {
  auto p = tensors(params);
  auto g = tensors(grads);
  auto m = tensors(m_);
  auto v = tensors(v_);
  auto active = [&](const TensorView& t) {
    if (trainable == Trainable::all) return true;
    return t.is_embedding == (trainable == Trainable::embedding_only);
  };
  std::vector<std::span<double>> live;
  for (auto& t : g) {
    if (active(t)) live.push_back(t.data);
  }
  clip_global_norm(live, clip_norm);
  ++t_;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!active(p[i])) continue;
    if (p[i].data.size() != m[i].data.size()) throw Error("optimizer state shape mismatch for " + p[i].name);
    adam_update(p[i].data, g[i].data, m[i].data, v[i].data, t_, lr);
  }
}

bool EarlyStopping::update(double value) {
  ++epoch_;
  improved_ = value < best_;
  if (improved_) {
    best_ = value;
    best_epoch_ = epoch_;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  return since_best_ >= patience_;
}

double masked_mae_over(const ModelParams& params, const TrafficSeries& series, const Normalizer& norm,
                       std::span<const Window> windows, std::size_t batch_size) {
  double sum = 0.0;
  std::size_t count = 0;
  const auto& cfg = params.config;
  for (std::size_t i = 0; i < windows.size(); i += batch_size) {
    auto chunk = windows.subspan(i, std::min(batch_size, windows.size() - i));
    auto batch = assemble_batch(series, norm, chunk, cfg.l1, cfg.l2);
    Mat pred = forward(params, batch);
    for (Eigen::Index k = 0; k < pred.size(); ++k) {
      const double y = batch.target.data()[k];
      if (y == 0.0) continue;
      sum += std::abs(norm.invert(pred.data()[k]) - y);
      ++count;
    }
  }
  if (count == 0) throw Error("no valid targets");
  return sum / static_cast<double>(count);
}

FitResult fit(const ModelParams& init, const FitData& data, const TrainConfig& config, Trainable trainable,
              const EpochCallback& on_epoch) {
  config.validate();
  if (!data.series) throw Error("fit: no training series");
  if (data.train.empty() || data.val.empty()) throw Error("fit: train and validation windows must be non-empty");
  const TrafficSeries& val_series = data.val_series ? *data.val_series : *data.series;
  const auto& cfg = init.config;

  ModelParams params = init;
  AdamState adam(params);
  FitResult result{params, {}};
  EarlyStopping stopper(config.patience);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Window> chunk;
  ForwardCache cache;
  bool warned = false;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t loss_cells = 0;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(config.batch_size)) {
      chunk.clear();
      for (std::size_t k = i; k < std::min(order.size(), i + static_cast<std::size_t>(config.batch_size)); ++k) {
        chunk.push_back(data.train[order[k]]);
      }
      auto batch = assemble_batch(*data.series, data.normalizer, chunk, cfg.l1, cfg.l2);
      Mat pred;
      try {
        pred = forward(params, batch, &cache);
      } catch (const Error& e) {
        result.report.stop_reason = "diverged";
        throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch), result.report);
      }
      auto loss = masked_mae_loss(pred, batch.target, data.normalizer);
      if (loss.valid == 0) {
        ++result.report.skipped_batches;
        if (!warned) {
          std::cerr << "warning: skipping fully masked batch(es)\n";
          warned = true;
        }
        continue;
      }
      if (!std::isfinite(loss.loss)) {
        result.report.stop_reason = "diverged";
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch), result.report);
      }
      loss_sum += loss.loss * static_cast<double>(loss.valid);
      loss_cells += loss.valid;
      auto grads = backward(params, cache, loss.grad, trainable);
      adam.step(params, grads, trainable, config.lr, config.grad_clip_norm);
    }
    const double train_loss = loss_cells ? loss_sum / static_cast<double>(loss_cells) : 0.0;
    const double val = masked_mae_over(params, val_series, data.normalizer, data.val);
    if (!std::isfinite(val)) {
      result.report.stop_reason = "diverged";
      throw DivergenceError("non-finite validation MAE at epoch " + std::to_string(epoch), result.report);
    }
    result.report.train_loss.push_back(train_loss);
    result.report.val_mae.push_back(val);
    const bool stop = stopper.update(val);
    if (stopper.improved()) result.best = params;
    if (on_epoch) on_epoch(epoch, train_loss, val);
    if (stop) {
      result.report.stop_reason = "patience";
      break;
    }
  }
  if (result.report.stop_reason.empty()) result.report.stop_reason = "max_epochs";
  result.report.best_epoch = stopper.best_epoch();
  result.report.best_val_mae = stopper.best();
  return result;
}

}  // namespace stpca
