#include "stpca/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace stpca {

MetricSet MetricAccumulator::result() const {
  if (count_ == 0) throw Error("no valid targets");
  const double n = static_cast<double>(count_);
  return {abs_ / n, std::sqrt(sq_ / n), ape_ / n};
}

MetricSet masked_metrics(const Mat& pred, const Mat& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw Error("metrics: shape mismatch");
  MetricAccumulator acc;
  for (Eigen::Index i = 0; i < pred.size(); ++i) acc.add(pred.data()[i], target.data()[i]);
  return acc.result();
}

namespace {

nlohmann::ordered_json metric_json(const MetricSet& m) {
  return {{"mae", m.mae}, {"rmse", m.rmse}, {"mape", m.mape}};
}

MetricSet metric_from_json(const nlohmann::ordered_json& j) {
  return {j.at("mae").get<double>(), j.at("rmse").get<double>(), j.at("mape").get<double>()};
}

}  // namespace

nlohmann::ordered_json HorizonReport::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["strategy"] = strategy;
  j["seed"] = seed;
  j["model_id"] = model_id;
  nlohmann::ordered_json h = nlohmann::ordered_json::object();
  for (const auto& [step, m] : horizons) h[std::to_string(step)] = metric_json(m);
  h["avg"] = metric_json(average);
  j["horizons"] = std::move(h);
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metadata) meta[k] = v;
  j["metadata"] = std::move(meta);
  return j;
}

HorizonReport HorizonReport::from_json(const nlohmann::ordered_json& j) {
  HorizonReport r;
  r.dataset = j.value("dataset", "");
  r.strategy = j.value("strategy", "");
  r.seed = j.value("seed", std::uint64_t{0});
  r.model_id = j.value("model_id", "");
  for (const auto& [key, val] : j.at("horizons").items()) {
    if (key == "avg") {
      r.average = metric_from_json(val);
    } else {
      r.horizons[std::stoi(key)] = metric_from_json(val);
    }
  }
  if (j.contains("metadata")) {
    for (const auto& [k, v] : j.at("metadata").items()) r.metadata[k] = v.get<std::string>();
  }
  return r;
}

std::string format_table_cell(const MetricSet& m) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.2f & %.2f & %.2f%%", m.mae, m.rmse, m.mape * 100.0);
  return buf;
}

std::string render_table(const std::vector<HorizonReport>& reports) {
  std::ostringstream out;
  if (reports.empty()) return {};
  out << "Dataset & Strategy";
  for (const auto& [step, m] : reports.front().horizons) out << " & Horizon " << step << " (MAE & RMSE & MAPE)";
  out << " & Average (MAE & RMSE & MAPE) \\\\\n";
  for (const auto& r : reports) {
    out << r.dataset << " & " << r.strategy;
    for (const auto& [step, m] : r.horizons) out << " & " << format_table_cell(m);
    out << " & " << format_table_cell(r.average) << " \\\\\n";
  }
  return out.str();
}

HorizonReport score_predictions(const Mat& pred, const Mat& target, int l2, const std::vector<int>& horizons) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() || pred.cols() != l2) {
    throw Error("score_predictions: shape mismatch");
  }
  for (int h : horizons) {
    if (h < 1 || h > l2) throw Error("horizon " + std::to_string(h) + " outside [1, " + std::to_string(l2) + "]");
  }
  std::vector<MetricAccumulator> per_step(static_cast<std::size_t>(l2));
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    for (int k = 0; k < l2; ++k) per_step[static_cast<std::size_t>(k)].add(pred(i, k), target(i, k));
  }
  HorizonReport r;
  MetricAccumulator all;
  for (const auto& acc : per_step) all.merge(acc);
  for (int h : horizons) r.horizons[h] = per_step[static_cast<std::size_t>(h - 1)].result();
  r.average = all.result();
  return r;
}

HorizonReport evaluate(const ModelParams& params, const TrafficSeries& series, const Normalizer& norm,
                       const std::vector<Window>& windows, const std::vector<int>& horizons, std::size_t batch_size) {
  if (windows.empty()) throw Error("evaluate: no windows");
  const auto& cfg = params.config;
  const auto n = static_cast<Eigen::Index>(series.num_nodes());
  const auto total_rows = static_cast<Eigen::Index>(windows.size()) * n;
  Mat pred(total_rows, cfg.l2);
  Mat target(total_rows, cfg.l2);
  std::span<const Window> all(windows);
  for (std::size_t i = 0; i < windows.size(); i += batch_size) {
    auto chunk = all.subspan(i, std::min(batch_size, windows.size() - i));
    auto batch = assemble_batch(series, norm, chunk, cfg.l1, cfg.l2);
    const auto offset = static_cast<Eigen::Index>(i) * n;
    pred.middleRows(offset, batch.target.rows()) = norm.invert(forward(params, batch));
    target.middleRows(offset, batch.target.rows()) = batch.target;
  }
  auto r = score_predictions(pred, target, cfg.l2, horizons);
  r.dataset = series.name;
  r.strategy = std::string(to_string(params.embedding.strategy));
  return r;
}

}  // namespace stpca
