#pragma once

#include "stpca/dataset.hpp"
#include "stpca/forecaster.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace stpca {

/// MAE, RMSE and MAPE over unmasked cells. mape is a fraction.
struct MetricSet {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;
};

/// Running sums for micro-averaged masked metrics.
class MetricAccumulator {
 public:
  void add(double pred, double target) {
    if (target == 0.0) return;
    const double d = pred - target;
    abs_ += std::abs(d);
    sq_ += d * d;
    ape_ += std::abs(d) / std::abs(target);
    ++count_;
  }
  void merge(const MetricAccumulator& o) {
    abs_ += o.abs_;
    sq_ += o.sq_;
    ape_ += o.ape_;
    count_ += o.count_;
  }
  std::size_t count() const { return count_; }
  /// Throws Error("no valid targets") when every cell was masked.
  MetricSet result() const;

 private:
  double abs_ = 0.0;
  double sq_ = 0.0;
  double ape_ = 0.0;
  std::size_t count_ = 0;
};

MetricSet masked_metrics(const Mat& pred, const Mat& target);

inline const std::vector<int> kDefaultHorizons{3, 6, 12};

struct HorizonReport {
  std::string dataset;
  std::string strategy;
  std::uint64_t seed = 0;
  std::string model_id;
  std::map<int, MetricSet> horizons;  // 1-based step -> metrics
  MetricSet average;                   // micro-average over every step 1..l2
  std::map<std::string, std::string> metadata;

  nlohmann::ordered_json to_json() const;
  static HorizonReport from_json(const nlohmann::ordered_json& j);
};

/// `MAE & RMSE & MAPE%` with two decimals.
std::string format_table_cell(const MetricSet& m);

/// Text table: one row per report, horizon groups as columns.
std::string render_table(const std::vector<HorizonReport>& reports);

/// Forward over `windows`, de-normalize, score per horizon and on average.
HorizonReport evaluate(const ModelParams& params, const TrafficSeries& series, const Normalizer& norm,
                       const std::vector<Window>& windows, const std::vector<int>& horizons = kDefaultHorizons,
                       std::size_t batch_size = 64);

/// Scores precomputed predictions laid out like Batch targets: one [N x l2]
/// block per window, stacked.
HorizonReport score_predictions(const Mat& pred, const Mat& target, int l2, const std::vector<int>& horizons);

}  // namespace stpca
