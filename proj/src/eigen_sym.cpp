#include "stpca/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stpca {

namespace {

constexpr double kOffDiagTol = 1e-12;
constexpr int kMaxSweeps = 100;

double max_off_diagonal(const Mat& a) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j)));
  }
  return m;
}

void rotate(Mat& a, Mat& v, Eigen::Index p, Eigen::Index q) {
  const double apq = a(p, q);
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  if (theta < 0.0) t = -t;
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const double tau = s / (1.0 + c);

  a(p, p) -= t * apq;
  a(q, q) += t * apq;
  a(p, q) = 0.0;
  a(q, p) = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    if (r == p || r == q) continue;
    const double g = a(r, p);
    const double h = a(r, q);
    a(r, p) = a(p, r) = g - s * (h + g * tau);
    a(r, q) = a(q, r) = h + s * (g - h * tau);
  }
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double g = v(r, p);
    const double h = v(r, q);
    v(r, p) = g - s * (h + g * tau);
    v(r, q) = h + s * (g - h * tau);
  }
}

}  // namespace

void normalize_column_signs(Mat& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    Eigen::Index best = 0;
    double mag = -1.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      // First index wins on exact magnitude ties.
      if (std::abs(m(i, j)) > mag) {
        mag = std::abs(m(i, j));
        best = i;
      }
    }
    if (m(best, j) < 0.0) m.col(j) *= -1.0;
  }
}

SymEigResult sym_eig(const Mat& input) {
  const Eigen::Index n = input.rows();
  if (n < 1 || input.cols() != n) throw Error("sym_eig: matrix must be square and non-empty");
  if (!input.allFinite()) throw Error("sym_eig: non-finite entries");
  const double scale = std::max(1.0, input.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(input(i, j) - input(j, i)) > 1e-10 * scale) throw Error("sym_eig: matrix is not symmetric");
    }
  }

  Mat a = 0.5 * (input + input.transpose());
  Mat v = Mat::Identity(n, n);
  int sweep = 0;
  while (sweep < kMaxSweeps && max_off_diagonal(a) >= kOffDiagTol) {
    ++sweep;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Below working precision relative to both diagonals: drop instead of rotating.
        const double g = 100.0 * std::abs(apq);
        if (sweep > 4 && std::abs(a(p, p)) + g == std::abs(a(p, p)) && std::abs(a(q, q)) + g == std::abs(a(q, q))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        rotate(a, v, p, q);
      }
    }
  }

  normalize_column_signs(v);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    if (a(x, x) != a(y, y)) return a(x, x) > a(y, y);
    // Exact ties: order by the eigenvectors lexicographically.
    for (Eigen::Index r = 0; r < n; ++r) {
      if (v(r, x) != v(r, y)) return v(r, x) > v(r, y);
    }
    return false;
  });

  SymEigResult out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values[k] = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  out.sweeps = sweep;
  return out;
}

}  // namespace stpca
