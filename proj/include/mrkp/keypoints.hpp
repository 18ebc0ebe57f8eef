#pragma once

#include "mrkp/point_cloud.hpp"

#include <string>

namespace mrkp {

/// K×N keypoint-affinity weights; each row is a distribution over the N points.
struct ScoreMatrix {
  Matrix<double> weights;

  Eigen::Index keypoint_count() const { return weights.rows(); }
  Eigen::Index point_count() const { return weights.cols(); }
};

/// K ordered keypoints; the row index is the semantic channel.
struct KeypointSet {
  Points<double> keypoints;
  std::string source_id;

  Eigen::Index size() const { return keypoints.rows(); }
};

/// Activation strengths (one per skeleton segment) plus the coefficients that the
/// decoder turns into per-point displacements, and the pooled descriptor they
/// were computed from.
struct GlobalFeature {
  Vector<double> activations;
  Matrix<double> offset_coefficients;
  Eigen::RowVectorXd descriptor;
};

inline Eigen::Index segment_count(Eigen::Index keypoints) { return keypoints * (keypoints - 1) / 2; }

void validate(const ScoreMatrix& scores, double tolerance = 1e-5);
void validate(const GlobalFeature& feature, Eigen::Index keypoints);

/// keypoint k = Σ_n weights(k, n) · points(n).
template <typename DerivedW, typename DerivedP>
Points<typename DerivedW::Scalar> predict_keypoints(const Eigen::MatrixBase<DerivedW>& weights,
                                                    const Eigen::MatrixBase<DerivedP>& points) {
  require(weights.cols() == points.rows() && points.cols() == 3, ErrorKind::kArgument,
          "score matrix has " + std::to_string(weights.cols()) + " columns but the cloud has " +
              std::to_string(points.rows()) + " points");
  return weights * points;
}

inline KeypointSet predict_keypoints(const ScoreMatrix& scores, const PointCloud& cloud) {
  return {predict_keypoints(scores.weights, cloud.points), cloud.id};
}

/// Per-point saliency: the column sums of the score matrix.
template <typename Derived>
Vector<typename Derived::Scalar> pointwise_saliency(const Eigen::MatrixBase<Derived>& weights) {
  return weights.colwise().sum().transpose();
}

inline Vector<double> pointwise_saliency(const ScoreMatrix& scores) {
  validate(scores);
  return pointwise_saliency(scores.weights);
}

}  // namespace mrkp
