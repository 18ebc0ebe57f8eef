#pragma once

#include "mrkp/keypoints.hpp"

#include <cmath>
#include <filesystem>
#include <utility>
#include <vector>

namespace mrkp {

struct SkeletonOptions {
  double interval = 0.05;
  Eigen::Index cap_per_segment = 64;
};

/// Number of arc-position basis functions per segment in the offset head
/// (cubic Bernstein polynomials).
inline constexpr Eigen::Index kOffsetBasisSize = 4;

/// Segment structure of a skeleton: segments follow lexicographic keypoint-pair
/// order (0,1), (0,2), ..., (K-2,K-1); points of segment s occupy rows
/// [segment_begin[s], segment_begin[s+1]).
struct SkeletonLayout {
  Eigen::Index keypoint_count = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> endpoints;
  std::vector<Eigen::Index> segment_begin;
  std::vector<double> arc;
  /// Segments whose two keypoints coincide.
  std::vector<Eigen::Index> degenerate_segments;

  Eigen::Index segment_count() const { return static_cast<Eigen::Index>(endpoints.size()); }
  Eigen::Index total_points() const { return segment_begin.empty() ? 0 : segment_begin.back(); }
  Eigen::Index segment_size(Eigen::Index s) const { return segment_begin[s + 1] - segment_begin[s]; }
};

template <typename Scalar>
struct BasicSkeletonReconstruction {
  SkeletonLayout layout;
  Points<Scalar> points;
  Vector<Scalar> activations;

  auto segment(Eigen::Index s) const {
    return points.middleRows(layout.segment_begin[s], layout.segment_size(s));
  }
};

using SkeletonReconstruction = BasicSkeletonReconstruction<double>;

/// Point count per segment: max(2, ceil(length / interval) + 1), capped.
template <typename Derived>
SkeletonLayout plan_skeleton(const Eigen::MatrixBase<Derived>& keypoints, const SkeletonOptions& options) {
  const Eigen::Index k = keypoints.rows();
  require(k >= 2, ErrorKind::kArgument, "a skeleton needs at least 2 keypoints");
  require(keypoints.cols() == 3 && keypoints.allFinite(), ErrorKind::kNumeric, "keypoints must be finite 3-vectors");
  require(options.interval > 0 && options.cap_per_segment >= 2, ErrorKind::kArgument,
          "skeleton interval must be positive and the cap at least 2");
  SkeletonLayout layout;
  layout.keypoint_count = k;
  layout.segment_begin.push_back(0);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double length = static_cast<double>((keypoints.row(j) - keypoints.row(i)).norm());
      // The 1e-9 slack keeps exact multiples (0.4 / 0.1) from rounding up.
      const auto steps = static_cast<Eigen::Index>(std::ceil(length / options.interval - 1e-9));
      const Eigen::Index count = std::min(options.cap_per_segment, std::max<Eigen::Index>(2, steps + 1));
      if (length == 0.0) layout.degenerate_segments.push_back(layout.segment_count());
      layout.endpoints.emplace_back(i, j);
      for (Eigen::Index m = 0; m < count; ++m) {
        layout.arc.push_back(static_cast<double>(m) / static_cast<double>(count - 1));
      }
      layout.segment_begin.push_back(layout.segment_begin.back() + count);
    }
  }
  return layout;
}

/// T×K matrix mapping keypoints onto the straight (pre-offset) skeleton points.
Matrix<double> interpolation_matrix(const SkeletonLayout& layout);

/// Cubic Bernstein basis at arc position t; sums to 1.
Eigen::Matrix<double, 1, kOffsetBasisSize> offset_basis(double t);

/// T×(S·B) matrix; row p holds the basis of point p in its segment's B columns.
/// Displacements are this matrix times the (S·B)×3 offset coefficients.
Matrix<double> offset_basis_matrix(const SkeletonLayout& layout);

/// Straight skeletons with unit activations.
template <typename Derived>
BasicSkeletonReconstruction<typename Derived::Scalar> build_skeletons(const Eigen::MatrixBase<Derived>& keypoints,
                                                                      const SkeletonOptions& options = {}) {
  using Scalar = typename Derived::Scalar;
  BasicSkeletonReconstruction<Scalar> rec;
  rec.layout = plan_skeleton(keypoints, options);
  rec.points = interpolation_matrix(rec.layout).template cast<Scalar>() * keypoints;
  rec.activations = Vector<Scalar>::Ones(rec.layout.segment_count());
  return rec;
}

inline SkeletonReconstruction build_skeletons(const KeypointSet& kp, const SkeletonOptions& options = {}) {
  return build_skeletons(kp.keypoints, options);
}

SkeletonReconstruction apply_offsets(const SkeletonReconstruction& skeleton, const GlobalFeature& feature);

SkeletonReconstruction decode(const KeypointSet& kp, const GlobalFeature& feature,
                              const SkeletonOptions& options = {});

/// ascii ply with per-point `segment` and `activation` properties.
void save_reconstruction_ply(const SkeletonReconstruction& rec, const std::filesystem::path& path);

}  // namespace mrkp
