#include "stpca/pca.hpp"

#include <algorithm>
#include <cmath>

namespace stpca {

std::string_view to_string(EmbeddingStrategy s) {
  switch (s) {
    case EmbeddingStrategy::adaptive: return "adaptive";
    case EmbeddingStrategy::pca: return "pca";
    case EmbeddingStrategy::zero: return "zero";
  }
  return "unknown";
}

EmbeddingStrategy parse_strategy(std::string_view text) {
  if (text == "adaptive" || text == "vanilla") return EmbeddingStrategy::adaptive;
  if (text == "pca") return EmbeddingStrategy::pca;
  if (text == "zero") return EmbeddingStrategy::zero;
  throw UsageError("unknown embedding strategy '" + std::string(text) + "'");
}

std::size_t components_for_threshold(const Vec& eigenvalues, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw Error("variance threshold must lie in (0, 1]");
  const double total = eigenvalues.sum();
  if (!(total > 0.0)) throw Error("spectrum has zero total variance");
  double acc = 0.0;
  for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
    acc += eigenvalues[k];
    // Small slack so theta = 1 is reachable despite rounding in the sum.
    if (acc / total >= theta - 1e-12) return static_cast<std::size_t>(k + 1);
  }
  return static_cast<std::size_t>(eigenvalues.size());
}

Vec explained_variance_ratio(const Vec& eigenvalues) {
  Vec out(eigenvalues.size());
  const double total = eigenvalues.sum();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
    acc += eigenvalues[k];
    out[k] = total > 0.0 ? acc / total : 0.0;
  }
  return out;
}

PcaProjection fit_projection(const DayTensor& z, const ComponentSpec& dim, bool centered) {
  const Eigen::Index m = z.data.rows();
  const Eigen::Index t = z.data.cols();
  if (m < 2) throw Error("PCA needs at least 2 day-profile samples");
  if (!z.data.allFinite()) throw Error("PCA input has non-finite entries");

  Vec mu = z.data.colwise().mean().transpose();
  Mat xc = z.data.rowwise() - mu.transpose();
  Mat cov = (xc.transpose() * xc) / static_cast<double>(m - 1);
  cov = 0.5 * (cov + cov.transpose());

  auto eig = sym_eig(cov);
  Vec lambda = eig.values.cwiseMax(0.0);

  const auto cap = static_cast<std::size_t>(std::min<Eigen::Index>(t, m - 1));
  std::size_t c = 0;
  if (const auto* count = std::get_if<ComponentCount>(&dim)) {
    c = count->count;
    if (c < 1) throw Error("component count must be at least 1");
    if (c > cap) {
      throw Error("requested " + std::to_string(c) + " components but at most " + std::to_string(cap) +
                  " are available");
    }
  } else {
    c = std::min(components_for_threshold(lambda, std::get<VarianceThreshold>(dim).theta), cap);
  }

  PcaProjection p;
  p.centered = centered;
  p.mean = centered ? mu : Vec::Zero(t);
  p.components = eig.vectors.leftCols(static_cast<Eigen::Index>(c));
  p.eigenvalues = lambda;
  return p;
}

PcaProjection truncate(const PcaProjection& proj, std::size_t count) {
  if (count < 1 || count > proj.dim()) throw Error("cannot truncate projection to " + std::to_string(count));
  PcaProjection out = proj;
  out.components = proj.components.leftCols(static_cast<Eigen::Index>(count));
  return out;
}

std::vector<Mat> embed_days(const DayTensor& z, const PcaProjection& proj) {
  if (z.slots != proj.slots() || static_cast<std::size_t>(z.data.cols()) != proj.slots()) {
    throw Error("day tensor has " + std::to_string(z.slots) + " slots but projection expects " +
                std::to_string(proj.slots()));
  }
  std::vector<Mat> out;
  out.reserve(z.days);
  for (std::size_t d = 0; d < z.days; ++d) {
    Mat centered = z.day(d).rowwise() - proj.mean.transpose();
    out.emplace_back(centered * proj.components);
  }
  return out;
}

EmbeddingTable average_embeddings(const std::vector<Mat>& per_day) {
  if (per_day.empty()) throw Error("cannot average an empty sequence of embeddings");
  Mat acc = Mat::Zero(per_day.front().rows(), per_day.front().cols());
  for (const auto& e : per_day) {
    if (e.rows() != acc.rows() || e.cols() != acc.cols()) throw Error("embedding shape mismatch");
    acc += e;
  }
  EmbeddingTable table;
  table.values = acc / static_cast<double>(per_day.size());
  table.strategy = EmbeddingStrategy::pca;
  return table;
}

EmbeddingTable refresh_embedding(const DayTensor& target, const PcaProjection& proj) {
  if (target.days == 0 || target.nodes == 0) throw Error("empty day tensor");
  auto table = average_embeddings(embed_days(target, proj));
  table.source.days = target.origin;
  return table;
}

double reconstruction_error(const DayTensor& z, const PcaProjection& proj) {
  Vec mu = z.data.colwise().mean().transpose();
  Mat xc = z.data.rowwise() - mu.transpose();
  Mat residual = xc - xc * proj.components * proj.components.transpose();
  return residual.norm();
}

}  // namespace stpca
