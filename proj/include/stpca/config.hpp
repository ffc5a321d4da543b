#pragma once

#include "stpca/embedding.hpp"
#include "stpca/forecaster.hpp"
#include "stpca/training.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace stpca {

/// Flat `section.key=value` run configuration. Lines starting with '#' and
/// blank lines are ignored; unknown keys are rejected.
struct RunConfig {
  std::string data_path;
  std::string adjacency_path;
  std::string shifted_path;
  std::array<double, 3> split{0.6, 0.2, 0.2};
  bool norm_include_zeros = true;
  int steps_per_day = 0;  // 0 = take from data

  int l1 = 12;
  int l2 = 12;

  EmbeddingStrategy strategy = EmbeddingStrategy::pca;
  int embed_dim = 0;  // 0 = pick from theta (pca) or 8 (adaptive, zero)
  double theta = 0.9;
  bool centered = true;

  int hidden_dim = 32;
  int tod_dim = 8;
  int dow_dim = 4;
  int num_blocks = 2;
  bool use_graph = false;

  double lr = 1e-3;
  int max_epochs = 200;
  int patience = 20;
  int batch_size = 32;
  double grad_clip_norm = 5.0;

  std::uint64_t seed = 0;
  std::string output_dir = "out";

  /// Applies one `key=value` assignment. Throws UsageError on unknown keys
  /// or malformed values.
  void set(std::string_view key, std::string_view value);

  /// Every key with its resolved value, one `key=value` per line, fixed order.
  std::string resolved() const;

  TrainConfig train_config() const;
  /// Model config for a given embedding width and slots per day.
  ModelConfig model_config(int embed, int slots) const;

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);
};

std::array<double, 3> parse_ratios(std::string_view text);

}  // namespace stpca
