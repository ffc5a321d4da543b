#pragma once

#include "stpca/types.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stpca {

/// Time x node grid of flow readings. Zero marks a missing reading.
struct TrafficSeries {
  Mat values;  // [total_steps x N]
  int interval_minutes = 5;
  int steps_per_day = 288;
  int start_slot = 0;  // slot of step 0 within its day
  int start_dow = 0;   // 0 = Monday
  long long start_minute = -1;  // minutes since 1970-01-01 of step 0, -1 if unknown
  std::vector<std::string> node_ids;
  std::optional<Mat> adjacency;  // [N x N], ingested but unused by the forecaster
  std::string name;              // dataset id carried into reports

  std::size_t total_steps() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t num_nodes() const { return static_cast<std::size_t>(values.cols()); }
  StepRange all() const { return {0, total_steps()}; }

  int slot_of(std::size_t step) const {
    return static_cast<int>((static_cast<std::size_t>(start_slot) + step) % steps_per_day);
  }
  int dow_of(std::size_t step) const {
    auto day = (static_cast<std::size_t>(start_slot) + step) / steps_per_day;
    return static_cast<int>((static_cast<std::size_t>(start_dow) + day) % 7);
  }

  /// Checks the structural invariants; throws Error on violation.
  void validate() const;
};

/// Days x nodes x slots reshape of a series segment. Day d occupies rows
/// [d*N, (d+1)*N) of `data`, so each row is one node's day profile.
struct DayTensor {
  Mat data;  // [(D*N) x T]
  std::size_t days = 0;
  std::size_t nodes = 0;
  std::size_t slots = 0;
  StepRange origin;  // steps of the source series covered by the retained days

  /// Day d as an [N x T] block.
  auto day(std::size_t d) const { return data.middleRows(static_cast<Eigen::Index>(d * nodes), static_cast<Eigen::Index>(nodes)); }
};

/// Global z-score normalizer fitted on a training range.
struct Normalizer {
  double mean = 0.0;
  double std = 1.0;

  double apply(double x) const { return (x - mean) / std; }
  double invert(double z) const { return z * std + mean; }
  Mat apply(const Mat& m) const { return ((m.array() - mean) / std).matrix(); }
  Mat invert(const Mat& m) const { return (m.array() * std + mean).matrix(); }
};

/// A forecasting window. History covers steps [start, start+l1), the target
/// covers [start+l1, start+l1+l2). tod/dow describe the first target step.
struct Window {
  std::size_t start = 0;
  int tod = 0;
  int dow = 0;
};

struct SplitRanges {
  StepRange train;
  StepRange val;
  StepRange test;
};

TrafficSeries ingest_csv(const std::filesystem::path& path);

/// Reads an edge list `src,dst,weight` keyed by the series' node ids into
/// series.adjacency.
void ingest_adjacency(TrafficSeries& series, const std::filesystem::path& path);

/// Writes the series in the ingest format. Unknown start times are anchored
/// in the week of 2024-01-01 at the series' weekday and slot.
void write_series_csv(const TrafficSeries& series, const std::filesystem::path& path);

SplitRanges split_chronological(std::size_t total_steps, const std::array<double, 3>& ratios);
inline SplitRanges split_chronological(const TrafficSeries& s, const std::array<double, 3>& ratios) {
  return split_chronological(s.total_steps(), ratios);
}

/// Population mean/std over every value in `range`. `include_zeros` = false
/// excludes masked readings from the statistics.
Normalizer fit_normalizer(const TrafficSeries& series, StepRange range, bool include_zeros = true);

std::vector<Window> make_windows(const TrafficSeries& series, StepRange range, int l1, int l2);

/// Complete slot-0-aligned days inside `range`. When `norm` is given the
/// tensor is z-scored with it.
DayTensor to_day_tensor(const TrafficSeries& series, StepRange range,
                        const std::optional<Normalizer>& norm = std::nullopt);

/// Largest range [range.begin, b) whose end b is a day boundary.
/// Returns an empty range when no full day fits.
StepRange day_aligned_prefix(const TrafficSeries& series, StepRange range);

/// Restricts a series to a subset of steps (metadata adjusted).
TrafficSeries slice_steps(const TrafficSeries& series, StepRange range);

/// Restricts a series to a subset of nodes, in the order given.
TrafficSeries select_nodes(const TrafficSeries& series, const std::vector<std::size_t>& nodes);

}  // namespace stpca
