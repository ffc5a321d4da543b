#pragma once

#include "stpca/config.hpp"
#include "stpca/dataset.hpp"
#include "stpca/forecaster.hpp"
#include "stpca/pca.hpp"
#include "stpca/training.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stpca {

/// Everything a config-driven training run produces.
struct TrainOutcome {
  TrafficSeries series;
  SplitRanges split;
  TrainedModel model;
  std::optional<PcaProjection> projection;  // pca strategy only
  TrainReport report;
};

/// ingest -> split -> normalize -> (fit projection) -> fit, as configured.
TrainOutcome train_pipeline(const RunConfig& cfg);

/// Loads the series named by the config, including the optional adjacency.
TrafficSeries load_series(const std::string& path, const std::string& adjacency = {});

/// Hex FNV-1a 64 of a byte string; used as a content-derived model id.
std::string content_id(std::string_view bytes);

/// Runs the command line. Returns the process exit code: 0 on success,
/// 1 for runtime or data errors, 2 for usage and config errors.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace stpca
