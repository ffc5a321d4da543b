#include "stpca/forecaster.hpp"

#include <cmath>
#include <random>

namespace stpca {

namespace {

void fill_uniform(Mat& m, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-a, a);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

template <class M>
TensorView view(std::string name, M& m, std::vector<std::uint32_t> dims, bool emb = false) {
  return {std::move(name), std::span<double>(m.data(), static_cast<std::size_t>(m.size())), std::move(dims), emb};
}

std::uint32_t u32(Eigen::Index v) { return static_cast<std::uint32_t>(v); }

// x * w^T + b, evaluated one row at a time so every row goes through the same
// kernel regardless of where it sits in the batch.
template <class X>
Mat affine(const X& x, const Mat& w, const Vec& b) {
  Mat out(x.rows(), w.rows());
  Vec tmp(w.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    tmp.noalias() = w * x.row(r).transpose();
    out.row(r) = (tmp + b).transpose();
  }
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (l1 < 1 || l2 < 1 || embed_dim < 1 || tod_dim < 1 || dow_dim < 1 || hidden_dim < 1 || num_blocks < 1 ||
      steps_per_day < 1) {
    throw Error("model config: all dimensions must be at least 1");
  }
}

std::vector<TensorView> tensors(ModelParams& p) {
  std::vector<TensorView> out;
  out.push_back(view("w_x", p.w_x, {u32(p.w_x.rows()), u32(p.w_x.cols())}));
  out.push_back(view("b_x", p.b_x, {u32(p.b_x.size())}));
  out.push_back(view("embedding", p.embedding.values, {u32(p.embedding.values.rows()), u32(p.embedding.values.cols())}, true));
  out.push_back(view("tod", p.tod, {u32(p.tod.rows()), u32(p.tod.cols())}));
  out.push_back(view("dow", p.dow, {u32(p.dow.rows()), u32(p.dow.cols())}));
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const auto pre = "block" + std::to_string(i) + ".";
    out.push_back(view(pre + "w1", b.w1, {u32(b.w1.rows()), u32(b.w1.cols())}));
    out.push_back(view(pre + "b1", b.b1, {u32(b.b1.size())}));
    out.push_back(view(pre + "w2", b.w2, {u32(b.w2.rows()), u32(b.w2.cols())}));
    out.push_back(view(pre + "b2", b.b2, {u32(b.b2.size())}));
  }
  out.push_back(view("w_o", p.w_o, {u32(p.w_o.rows()), u32(p.w_o.cols())}));
  out.push_back(view("b_o", p.b_o, {u32(p.b_o.size())}));
  return out;
}

ModelParams init_params(const ModelConfig& config, std::size_t n, std::uint64_t seed) {
  config.validate();
  if (n < 1) throw Error("model needs at least one node");
  std::mt19937_64 rng(seed);
  const int cm = config.mixed_dim();
  ModelParams p;
  p.config = config;
  p.w_x.resize(config.hidden_dim, config.l1);
  fill_uniform(p.w_x, rng);
  p.b_x = Vec::Zero(config.hidden_dim);
  p.tod.resize(config.steps_per_day, config.tod_dim);
  fill_uniform(p.tod, rng);
  p.dow.resize(7, config.dow_dim);
  fill_uniform(p.dow, rng);
  p.blocks.resize(static_cast<std::size_t>(config.num_blocks));
  for (auto& b : p.blocks) {
    b.w1.resize(cm, cm);
    fill_uniform(b.w1, rng);
    b.b1 = Vec::Zero(cm);
    b.w2.resize(cm, cm);
    fill_uniform(b.w2, rng);
    b.b2 = Vec::Zero(cm);
  }
  p.w_o.resize(config.l2, cm);
  fill_uniform(p.w_o, rng);
  p.b_o = Vec::Zero(config.l2);

  // Drawn last so the shared weights do not depend on the node count.
  p.embedding.values.resize(idx(n), config.embed_dim);
  std::normal_distribution<double> normal(0.0, 0.01);
  for (Eigen::Index i = 0; i < p.embedding.values.size(); ++i) p.embedding.values.data()[i] = normal(rng);
  p.embedding.strategy = EmbeddingStrategy::adaptive;
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for (auto& t : tensors(z)) std::fill(t.data.begin(), t.data.end(), 0.0);
  return z;
}

EmbeddingTable zero_embedding(std::size_t n, std::size_t dim) {
  EmbeddingTable t;
  t.values = Mat::Zero(idx(n), idx(dim));
  t.strategy = EmbeddingStrategy::zero;
  return t;
}

void set_embedding(ModelParams& params, EmbeddingTable table) {
  if (table.values.cols() != params.config.embed_dim) {
    throw Error("embedding has " + std::to_string(table.values.cols()) + " columns but the model expects " +
                std::to_string(params.config.embed_dim));
  }
  if (table.values.rows() < 1) throw Error("embedding has no rows");
  if (table.strategy == EmbeddingStrategy::zero) table.values.setZero();
  if (!table.values.allFinite()) throw Error("embedding has non-finite entries");
  params.embedding = std::move(table);
}

Batch assemble_batch(const TrafficSeries& series, const Normalizer& norm, std::span<const Window> windows, int l1,
                     int l2) {
  const std::size_t n = series.num_nodes();
  Batch b;
  b.nodes = n;
  b.x.resize(idx(windows.size() * n), l1);
  b.target.resize(idx(windows.size() * n), l2);
  b.tod.reserve(windows.size());
  b.dow.reserve(windows.size());
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& win = windows[w];
    if (win.start + static_cast<std::size_t>(l1 + l2) > series.total_steps()) throw Error("window exceeds series");
    for (std::size_t node = 0; node < n; ++node) {
      const auto row = idx(w * n + node);
      for (int k = 0; k < l1; ++k) b.x(row, k) = norm.apply(series.values(idx(win.start) + k, idx(node)));
      for (int k = 0; k < l2; ++k) b.target(row, k) = series.values(idx(win.start) + l1 + k, idx(node));
    }
    b.tod.push_back(win.tod);
    b.dow.push_back(win.dow);
  }
  return b;
}

Mat forward(const ModelParams& p, const Batch& batch, ForwardCache* cache) {
  const auto& cfg = p.config;
  const std::size_t n = batch.nodes;
  const std::size_t nb = batch.windows();
  if (batch.x.cols() != cfg.l1) throw Error("batch history length does not match model l1");
  if (batch.x.rows() != idx(nb * n)) throw Error("batch shape mismatch");
  if (p.embedding.rows() != n) {
    throw Error("embedding has " + std::to_string(p.embedding.rows()) + " rows but batch has " + std::to_string(n) +
                " nodes");
  }
  const int ch = cfg.hidden_dim, ce = cfg.embed_dim, ct = cfg.tod_dim, cd = cfg.dow_dim;
  const auto rows = idx(nb * n);

  Mat h(rows, cfg.mixed_dim());
  h.leftCols(ch) = affine(batch.x, p.w_x, p.b_x);
  for (std::size_t w = 0; w < nb; ++w) {
    const int tod = batch.tod[w];
    const int dow = batch.dow[w];
    if (tod < 0 || tod >= cfg.steps_per_day || dow < 0 || dow >= 7) throw Error("time index out of range");
    auto blk = h.middleRows(idx(w * n), idx(n));
    blk.middleCols(ch, ce) = p.embedding.values;
    blk.middleCols(ch + ce, ct).rowwise() = p.tod.row(tod);
    blk.middleCols(ch + ce + ct, cd).rowwise() = p.dow.row(dow);
  }

  if (cache) {
    cache->x = batch.x;
    cache->hidden.clear();
    cache->pre_act.clear();
    cache->graph.reset();
    cache->tod = batch.tod;
    cache->dow = batch.dow;
    cache->nodes = n;
  }

  std::optional<AdaptiveGraph> graph;
  if (cfg.use_graph) graph = build_adaptive_graph(p.embedding.values);

  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const auto& blk = p.blocks[i];
    Mat z = affine(h, blk.w1, blk.b1);
    Mat out = h + affine(z.cwiseMax(0.0), blk.w2, blk.b2);
    if (!out.allFinite()) throw Error("non-finite activation in block " + std::to_string(i));
    if (cache) {
      cache->hidden.push_back(std::move(h));
      cache->pre_act.push_back(std::move(z));
    }
    h = std::move(out);
    if (i == 0 && graph) {
      if (cache) cache->pre_mix = h;
      for (std::size_t w = 0; w < nb; ++w) {
        auto part = h.middleRows(idx(w * n), idx(n));
        part = graph_mix(*graph, part);
      }
    }
  }
  Mat y = affine(h, p.w_o, p.b_o);
  if (!y.allFinite()) throw Error("non-finite output");
  if (cache) {
    cache->hidden.push_back(std::move(h));
    cache->graph = std::move(graph);
  }
  return y;
}

ModelParams backward(const ModelParams& p, const ForwardCache& cache, const Mat& dy, Trainable trainable) {
  const auto& cfg = p.config;
  const std::size_t n = cache.nodes;
  const std::size_t nb = cache.tod.size();
  if (dy.rows() != idx(nb * n) || dy.cols() != cfg.l2) throw Error("loss gradient shape mismatch");
  if (cache.hidden.size() != p.blocks.size() + 1) throw Error("forward cache does not match model");

  ModelParams g = zeros_like(p);
  const bool shared = trainable != Trainable::embedding_only;
  const bool emb = trainable != Trainable::all_but_embedding;
  const int ch = cfg.hidden_dim, ce = cfg.embed_dim, ct = cfg.tod_dim, cd = cfg.dow_dim;

  if (shared) {
    g.w_o = dy.transpose() * cache.hidden.back();
    g.b_o = dy.colwise().sum().transpose();
  }
  Mat dh = dy * p.w_o;
  Mat dgraph;
  if (cache.graph) dgraph = Mat::Zero(idx(n), idx(n));

  for (std::size_t ii = p.blocks.size(); ii-- > 0;) {
    const auto& blk = p.blocks[ii];
    if (ii == 0 && cache.graph) {
      const Mat& gw = cache.graph->weights;
      for (std::size_t w = 0; w < nb; ++w) {
        auto d_out = dh.middleRows(idx(w * n), idx(n));
        if (emb) dgraph.noalias() += d_out * cache.pre_mix.middleRows(idx(w * n), idx(n)).transpose();
        Mat d_in = gw.transpose() * d_out;
        d_out = d_in;
      }
    }
    const Mat& z = cache.pre_act[ii];
    Mat act = z.cwiseMax(0.0);
    Mat dz = (dh * blk.w2).cwiseProduct((z.array() > 0.0).cast<double>().matrix());
    if (shared) {
      auto& gb = g.blocks[ii];
      gb.w2 = dh.transpose() * act;
      gb.b2 = dh.colwise().sum().transpose();
      gb.w1 = dz.transpose() * cache.hidden[ii];
      gb.b1 = dz.colwise().sum().transpose();
    }
    dh += dz * blk.w1;
  }

  if (shared) {
    auto du = dh.leftCols(ch);
    g.w_x = du.transpose() * cache.x;
    g.b_x = du.colwise().sum().transpose();
  }
  for (std::size_t w = 0; w < nb; ++w) {
    auto blk = dh.middleRows(idx(w * n), idx(n));
    if (emb) g.embedding.values += blk.middleCols(ch, ce);
    if (shared) {
      g.tod.row(cache.tod[w]) += blk.middleCols(ch + ce, ct).colwise().sum();
      g.dow.row(cache.dow[w]) += blk.middleCols(ch + ce + ct, cd).colwise().sum();
    }
  }
  if (emb && cache.graph) {
    g.embedding.values += adaptive_graph_backward(p.embedding.values, *cache.graph, dgraph);
  }

  for (auto& t : tensors(g)) {
    for (double v : t.data) {
      if (!std::isfinite(v)) throw Error("non-finite gradient in tensor " + t.name);
    }
  }
  return g;
}

}  // namespace stpca
