#include "stpca/adaptive_graph.hpp"

#include "stpca/io.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <vector>

namespace stpca {

AdaptiveGraph build_adaptive_graph(const Mat& e) {
  if (e.rows() < 1) throw Error("adaptive graph needs at least one node");
  if (!e.allFinite()) throw Error("adaptive graph: non-finite embedding");
  const Eigen::Index n = e.rows();
  // Plain loops and an order-independent row sum keep the graph exactly
  // permutation-equivariant.
  Mat logits(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double dot = 0.0;
      for (Eigen::Index k = 0; k < e.cols(); ++k) dot += e(i, k) * e(j, k);
      logits(i, j) = dot > 0.0 ? dot : 0.0;
    }
  }
  AdaptiveGraph g;
  g.weights.resize(n, n);
  std::vector<double> sorted(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = logits.row(i).maxCoeff();
    for (Eigen::Index j = 0; j < n; ++j) {
      g.weights(i, j) = std::exp(logits(i, j) - mx);
      sorted[static_cast<std::size_t>(j)] = g.weights(i, j);
    }
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double w : sorted) sum += w;
    g.weights.row(i) /= sum;
  }
  return g;
}

Mat adaptive_graph_backward(const Mat& e, const AdaptiveGraph& g, const Mat& grad_w) {
  const Mat& w = g.weights;
  Mat sim = e * e.transpose();
  // Row softmax VJP, then the ReLU gate.
  Vec row_dot = (w.cwiseProduct(grad_w)).rowwise().sum();
  Mat grad_logits = w.cwiseProduct(grad_w.colwise() - row_dot);
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    for (Eigen::Index j = 0; j < sim.cols(); ++j) {
      if (!(sim(i, j) > 0.0)) grad_logits(i, j) = 0.0;
    }
  }
  return (grad_logits + grad_logits.transpose()) * e;
}

Mat graph_mix(const AdaptiveGraph& g, const Mat& h) {
  if (g.weights.cols() != h.rows()) {
    throw Error("graph_mix: graph is " + std::to_string(g.size()) + " nodes but features have " +
                std::to_string(h.rows()) + " rows");
  }
  return g.weights * h;
}

void write_graph_csv(const AdaptiveGraph& g, const std::vector<std::string>& node_ids, double min_weight,
                     const std::filesystem::path& path) {
  if (node_ids.size() != g.size()) throw Error("node id count does not match graph size");
  std::ostringstream out;
  out << "src,dst,weight\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < g.weights.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.weights.cols(); ++j) {
      const double w = g.weights(i, j);
      if (min_weight > 0.0 && !(w > min_weight)) continue;
      out << node_ids[static_cast<std::size_t>(i)] << ',' << node_ids[static_cast<std::size_t>(j)] << ',' << w << '\n';
    }
  }
  write_file_atomic(path, out.str());
}

}  // namespace stpca
