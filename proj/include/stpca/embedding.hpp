#pragma once

#include "stpca/types.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace stpca {

enum class EmbeddingStrategy : unsigned char { adaptive = 0, pca = 1, zero = 2 };

std::string_view to_string(EmbeddingStrategy s);
/// Accepts adaptive|vanilla, pca, zero.
EmbeddingStrategy parse_strategy(std::string_view text);

struct EmbeddingSource {
  std::string dataset;
  StepRange days;  // steps the embedding was computed from (empty for adaptive/zero)
  std::string projection;
};

/// Per-node embedding [N x C] tagged with how it was produced.
struct EmbeddingTable {
  Mat values;
  EmbeddingStrategy strategy = EmbeddingStrategy::adaptive;
  EmbeddingSource source;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
};

}  // namespace stpca
