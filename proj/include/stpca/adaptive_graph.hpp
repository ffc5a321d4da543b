#pragma once

#include "stpca/embedding.hpp"
#include "stpca/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace stpca {

/// Row-stochastic adjacency derived from node embeddings.
struct AdaptiveGraph {
  Mat weights;  // [N x N]

  std::size_t size() const { return static_cast<std::size_t>(weights.rows()); }
};

/// softmax_rows(relu(E E^T)).
AdaptiveGraph build_adaptive_graph(const Mat& embedding);
inline AdaptiveGraph build_adaptive_graph(const EmbeddingTable& e) { return build_adaptive_graph(e.values); }

/// Vector-Jacobian product of build_adaptive_graph: given dL/dG returns dL/dE.
Mat adaptive_graph_backward(const Mat& embedding, const AdaptiveGraph& graph, const Mat& grad_weights);

/// g.weights * h.
Mat graph_mix(const AdaptiveGraph& g, const Mat& h);

/// Edge list `src,dst,weight` of edges heavier than min_weight. A threshold
/// of 0 or less exports the dense graph.
void write_graph_csv(const AdaptiveGraph& g, const std::vector<std::string>& node_ids, double min_weight,
                     const std::filesystem::path& path);

}  // namespace stpca
