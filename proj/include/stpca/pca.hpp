#pragma once

#include "stpca/dataset.hpp"
#include "stpca/embedding.hpp"
#include "stpca/types.hpp"

#include <variant>
#include <vector>

namespace stpca {

struct SymEigResult {
  Vec values;  // descending
  Mat vectors;  // column i pairs with values[i]
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Sweeps until every
/// off-diagonal magnitude is below 1e-12 or 100 sweeps have run. Each column
/// is sign-normalised so its largest-magnitude entry is positive.
SymEigResult sym_eig(const Mat& a);

/// Flips each column so that its largest-magnitude entry is positive.
void normalize_column_signs(Mat& m);

struct ComponentCount {
  std::size_t count;
};
struct VarianceThreshold {
  double theta;
};
using ComponentSpec = std::variant<ComponentCount, VarianceThreshold>;

inline constexpr double kDefaultTheta = 0.9;

struct PcaProjection {
  Vec mean;         // [T]
  Mat components;   // [T x C], orthonormal columns, descending eigenvalue order
  Vec eigenvalues;  // [T], full spectrum, descending, non-negative
  bool centered = true;

  std::size_t slots() const { return static_cast<std::size_t>(components.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(components.cols()); }
};

/// Smallest k with cumulative explained-variance ratio >= theta.
std::size_t components_for_threshold(const Vec& eigenvalues, double theta);

/// Cumulative explained-variance ratio for k = 1..T.
Vec explained_variance_ratio(const Vec& eigenvalues);

/// PCA over the D*N day profiles of `z`. `centered = false` skips the mean
/// subtraction in the projection (ablation), the covariance is always centered.
PcaProjection fit_projection(const DayTensor& z, const ComponentSpec& dim, bool centered = true);

/// Same projection keeping only the first `count` components.
PcaProjection truncate(const PcaProjection& proj, std::size_t count);

/// E^d = (Z^d - 1 mu^T) P for every day.
std::vector<Mat> embed_days(const DayTensor& z, const PcaProjection& proj);

EmbeddingTable average_embeddings(const std::vector<Mat>& per_day);

/// embed_days followed by average_embeddings. The node count of `target` is
/// independent of the one the projection was fitted on.
EmbeddingTable refresh_embedding(const DayTensor& target, const PcaProjection& proj);

/// ||Xc - Xc P P^T||_F over the centered samples of z.
double reconstruction_error(const DayTensor& z, const PcaProjection& proj);

}  // namespace stpca
