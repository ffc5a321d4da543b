#pragma once

#include "stpca/dataset.hpp"
#include "stpca/pca.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

namespace stpca::test {

inline Mat random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

inline Mat random_symmetric(Eigen::Index n, std::uint64_t seed) {
  Mat a = random_matrix(n, n, seed);
  return (a + a.transpose()) / 2.0;
}

/// Series with metadata filled in; values are used as given.
inline TrafficSeries make_series(Mat values, int steps_per_day, int start_slot = 0, int start_dow = 0) {
  TrafficSeries s;
  s.values = std::move(values);
  s.steps_per_day = steps_per_day;
  s.interval_minutes = 1440 / steps_per_day;
  s.start_slot = start_slot;
  s.start_dow = start_dow;
  for (Eigen::Index j = 0; j < s.values.cols(); ++j) s.node_ids.push_back("s" + std::to_string(j));
  s.name = "toy";
  return s;
}

inline DayTensor make_tensor(Mat data, std::size_t days, std::size_t nodes) {
  DayTensor z;
  z.slots = static_cast<std::size_t>(data.cols());
  z.data = std::move(data);
  z.days = days;
  z.nodes = nodes;
  z.origin = {0, days * z.slots};
  return z;
}

/// Orthonormal components, non-decreasing explained-variance ratio and
/// non-increasing reconstruction error in k.
inline void check_projection_invariants(const DayTensor& z, const PcaProjection& proj) {
  const auto c = static_cast<Eigen::Index>(proj.dim());
  const Mat gram = proj.components.transpose() * proj.components;
  CHECK((gram - Mat::Identity(c, c)).norm() < 1e-8);
  const Vec ratio = explained_variance_ratio(proj.eigenvalues);
  for (Eigen::Index i = 1; i < ratio.size(); ++i) CHECK(ratio(i) >= ratio(i - 1));
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= proj.dim(); ++k) {
    const double err = reconstruction_error(z, truncate(proj, k));
    CHECK(err <= prev + 1e-9 * (1.0 + prev));
    prev = err;
  }
  for (Eigen::Index i = 1; i < proj.eigenvalues.size(); ++i) CHECK(proj.eigenvalues(i) <= proj.eigenvalues(i - 1));
  CHECK(proj.eigenvalues.minCoeff() >= 0.0);
}

inline PcaProjection fit_checked(const DayTensor& z, const ComponentSpec& dim, bool centered = true) {
  auto proj = fit_projection(z, dim, centered);
  check_projection_invariants(z, proj);
  return proj;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("stpca_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace stpca::test
