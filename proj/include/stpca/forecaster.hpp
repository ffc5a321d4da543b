#pragma once

#include "stpca/adaptive_graph.hpp"
#include "stpca/dataset.hpp"
#include "stpca/embedding.hpp"
#include "stpca/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stpca {

struct ModelConfig {
  int l1 = 12;
  int l2 = 12;
  int embed_dim = 8;
  int tod_dim = 8;
  int dow_dim = 4;
  int hidden_dim = 32;
  int num_blocks = 2;
  bool use_graph = false;
  int steps_per_day = 288;

  /// Width of the concatenated hidden state.
  int mixed_dim() const { return hidden_dim + embed_dim + tod_dim + dow_dim; }
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ResidualBlock {
  Mat w1;  // [Cm x Cm]
  Vec b1;
  Mat w2;  // [Cm x Cm]
  Vec b2;
};

/// Node-shared forecaster parameters. The only per-node tensor is the
/// embedding slot, so the same weights serve any node count.
struct ModelParams {
  ModelConfig config;
  Mat w_x;  // [Ch x l1]
  Vec b_x;
  EmbeddingTable embedding;  // [N x Ce]
  Mat tod;  // [T x Ct]
  Mat dow;  // [7 x Cd]
  std::vector<ResidualBlock> blocks;
  Mat w_o;  // [l2 x Cm]
  Vec b_o;

  std::size_t num_nodes() const { return embedding.rows(); }
};

/// Which tensors an optimizer may update.
enum class Trainable { all, all_but_embedding, embedding_only };

/// Default trainable set for a model trained under `s`.
inline Trainable trainable_for(EmbeddingStrategy s) {
  return s == EmbeddingStrategy::adaptive ? Trainable::all : Trainable::all_but_embedding;
}

/// Flat view of one parameter tensor.
struct TensorView {
  std::string name;
  std::span<double> data;
  std::vector<std::uint32_t> dims;
  bool is_embedding = false;
};

/// Every tensor in fixed order: w_x, b_x, embedding, tod, dow,
/// block{i}.{w1,b1,w2,b2}, w_o, b_o.
std::vector<TensorView> tensors(ModelParams& p);

/// A trained model together with the normalizer its inputs expect.
struct TrainedModel {
  ModelParams params;
  Normalizer normalizer;
};

ModelParams init_params(const ModelConfig& config, std::size_t n, std::uint64_t seed);

/// Same shapes as `p`, every entry zero.
ModelParams zeros_like(const ModelParams& p);

EmbeddingTable zero_embedding(std::size_t n, std::size_t dim);

/// Swaps the embedding slot. A zero-strategy table is forced to exact zeros.
void set_embedding(ModelParams& params, EmbeddingTable table);

/// Model inputs for B windows over N nodes; row b*N + n belongs to node n
/// of window b.
struct Batch {
  Mat x;       // [(B*N) x l1], normalized
  Mat target;  // [(B*N) x l2], original units
  std::vector<int> tod;
  std::vector<int> dow;
  std::size_t nodes = 0;

  std::size_t windows() const { return tod.size(); }
};

Batch assemble_batch(const TrafficSeries& series, const Normalizer& norm, std::span<const Window> windows, int l1,
                     int l2);

/// Intermediates kept by forward for the backward pass.
struct ForwardCache {
  Mat x;
  std::vector<Mat> hidden;  // input to block i (hidden[0] = concat), last = head input
  std::vector<Mat> pre_act;  // W1 h + b1 per block
  std::optional<AdaptiveGraph> graph;
  Mat pre_mix;  // output of block 0 before graph mixing
  std::vector<int> tod;
  std::vector<int> dow;
  std::size_t nodes = 0;
};

/// Predictions in normalized units, [(B*N) x l2].
Mat forward(const ModelParams& params, const Batch& batch, ForwardCache* cache = nullptr);

/// Exact reverse-mode gradients of sum(loss_grad .* forward(...)). Tensors
/// outside `trainable` receive zeros.
ModelParams backward(const ModelParams& params, const ForwardCache& cache, const Mat& loss_grad,
                     Trainable trainable);

}  // namespace stpca
