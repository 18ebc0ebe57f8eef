#pragma once

#include "mrkp/types.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mrkp {

/// N points with optional per-point integer part labels.
template <typename Scalar>
struct BasicPointCloud {
  Points<Scalar> points;
  std::optional<std::vector<int>> part_labels;
  std::string category;
  std::string id;

  Eigen::Index size() const { return points.rows(); }
  bool has_part_labels() const { return part_labels.has_value(); }
};

using PointCloud = BasicPointCloud<double>;

template <typename Scalar>
void validate(const BasicPointCloud<Scalar>& cloud) {
  require(cloud.points.rows() >= 2, ErrorKind::kDegenerateInput,
          "point cloud '" + cloud.id + "' has fewer than 2 points");
  require(cloud.points.allFinite(), ErrorKind::kNumeric,
          "point cloud '" + cloud.id + "' has non-finite coordinates");
  if (cloud.part_labels) {
    require(static_cast<Eigen::Index>(cloud.part_labels->size()) == cloud.points.rows(),
            ErrorKind::kArgument, "part label count does not match point count");
  }
}

/// Center-and-scale mapping onto the unit box: x -> (x - center) * scale.
template <typename Scalar>
struct UnitBoxTransform {
  Vector3<Scalar> center;
  Scalar scale;

  template <typename Derived>
  Points<Scalar> apply(const Eigen::MatrixBase<Derived>& points) const {
    return ((points.rowwise() - center.transpose()) * scale).eval();
  }
};

template <typename Derived>
UnitBoxTransform<typename Derived::Scalar> unit_box_transform(const Eigen::MatrixBase<Derived>& points) {
  using Scalar = typename Derived::Scalar;
  require(points.rows() >= 2, ErrorKind::kDegenerateInput, "need at least 2 points to normalize");
  const Vector3<Scalar> lo = points.colwise().minCoeff().transpose();
  const Vector3<Scalar> hi = points.colwise().maxCoeff().transpose();
  const Scalar extent = (hi - lo).maxCoeff();
  require(extent > Scalar(0), ErrorKind::kDegenerateInput, "all points are identical");
  return {((lo + hi) / Scalar(2)), Scalar(1) / extent};
}

/// Centers the bounding box at the origin and scales its longest side to 1.
template <typename Scalar>
BasicPointCloud<Scalar> normalize_unit_box(const BasicPointCloud<Scalar>& cloud) {
  validate(cloud);
  BasicPointCloud<Scalar> out = cloud;
  out.points = unit_box_transform(cloud.points).apply(cloud.points);
  return out;
}

namespace detail {

template <typename Derived>
bool lexicographically_less(const Eigen::MatrixBase<Derived>& points, Eigen::Index a, Eigen::Index b) {
  for (int c = 0; c < 3; ++c) {
    if (points(a, c) != points(b, c)) return points(a, c) < points(b, c);
  }
  return a < b;
}

}  // namespace detail

/// Greedy max-min subsampling starting from `first`. Ties go to the lowest index.
template <typename Derived>
std::vector<Eigen::Index> farthest_point_indices(const Eigen::MatrixBase<Derived>& points, Eigen::Index m,
                                                 Eigen::Index first) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = points.rows();
  require(m >= 1 && m <= n, ErrorKind::kArgument,
          "sample count " + std::to_string(m) + " outside [1, " + std::to_string(n) + "]");
  require(first >= 0 && first < n, ErrorKind::kArgument, "first index out of range");

  std::vector<Eigen::Index> picked;
  picked.reserve(static_cast<std::size_t>(m));
  std::vector<Scalar> min_sq(static_cast<std::size_t>(n), std::numeric_limits<Scalar>::infinity());
  Eigen::Index current = first;
  for (Eigen::Index k = 0; k < m; ++k) {
    picked.push_back(current);
    if (k + 1 == m) break;
    Eigen::Index best = -1;
    Scalar best_sq = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar d = (points.row(i) - points.row(current)).squaredNorm();
      auto& slot = min_sq[static_cast<std::size_t>(i)];
      if (d < slot) slot = d;
      if (slot > best_sq) {
        best_sq = slot;
        best = i;
      }
    }
    current = best;
  }
  return picked;
}

/// Max-min subsampling whose result depends only on the point set, not its order.
/// Starts at the point farthest from the centroid; ties go to the lexicographically
/// smallest coordinates.
template <typename Derived>
std::vector<Eigen::Index> canonical_farthest_point_indices(const Eigen::MatrixBase<Derived>& points,
                                                           Eigen::Index m) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = points.rows();
  require(m >= 1 && m <= n, ErrorKind::kArgument, "sample count outside [1, N]");

  const Eigen::Matrix<Scalar, 1, 3> centroid = points.colwise().mean();
  std::vector<Scalar> min_sq(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) min_sq[i] = (points.row(i) - centroid).squaredNorm();

  std::vector<Eigen::Index> picked;
  picked.reserve(static_cast<std::size_t>(m));
  auto pick_max = [&]() {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i) {
      if (min_sq[i] > min_sq[best] ||
          (min_sq[i] == min_sq[best] && detail::lexicographically_less(points, i, best))) {
        best = i;
      }
    }
    return best;
  };
  Eigen::Index current = pick_max();
  for (Eigen::Index k = 0; k < m; ++k) {
    picked.push_back(current);
    if (k + 1 == m) break;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar d = (points.row(i) - points.row(current)).squaredNorm();
      if (k == 0 || d < min_sq[i]) min_sq[i] = d;
    }
    current = pick_max();
  }
  return picked;
}

template <typename Scalar>
BasicPointCloud<Scalar> select(const BasicPointCloud<Scalar>& cloud, const std::vector<Eigen::Index>& indices) {
  BasicPointCloud<Scalar> out;
  out.category = cloud.category;
  out.id = cloud.id;
  out.points.resize(static_cast<Eigen::Index>(indices.size()), 3);
  if (cloud.part_labels) out.part_labels.emplace(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.points.row(static_cast<Eigen::Index>(k)) = cloud.points.row(indices[k]);
    if (cloud.part_labels) (*out.part_labels)[k] = (*cloud.part_labels)[static_cast<std::size_t>(indices[k])];
  }
  return out;
}

/// Seeded farthest-point sampling down to m points. Part labels are carried through.
template <typename Scalar>
BasicPointCloud<Scalar> farthest_point_sample(const BasicPointCloud<Scalar>& cloud, Eigen::Index m,
                                              std::uint64_t seed) {
  require(m >= 1 && m <= cloud.size(), ErrorKind::kArgument,
          "cannot sample " + std::to_string(m) + " points from " + std::to_string(cloud.size()));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> first(0, cloud.size() - 1);
  return select(cloud, farthest_point_indices(cloud.points, m, first(rng)));
}

template <typename Scalar>
BasicPointCloud<Scalar> add_gaussian_noise(const BasicPointCloud<Scalar>& cloud, Scalar sigma, std::uint64_t seed) {
  require(sigma >= Scalar(0), ErrorKind::kArgument, "noise sigma must be non-negative");
  BasicPointCloud<Scalar> out = cloud;
  if (sigma == Scalar(0)) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<Scalar> noise(Scalar(0), sigma);
  for (Eigen::Index i = 0; i < out.points.rows(); ++i) {
    for (int c = 0; c < 3; ++c) out.points(i, c) += noise(rng);
  }
  return out;
}

}  // namespace mrkp
