#include "mrkp/model.hpp"

#include <random>

namespace mrkp {

void validate(const ScoreMatrix& scores, double tolerance) {
  require(scores.weights.rows() >= 1 && scores.weights.cols() >= 1, ErrorKind::kArgument, "empty score matrix");
  require(scores.weights.allFinite(), ErrorKind::kNumeric, "score matrix has non-finite entries");
  require(scores.weights.minCoeff() >= 0.0 && scores.weights.maxCoeff() <= 1.0, ErrorKind::kArgument,
          "score matrix entries must lie in [0, 1]");
  const Vector<double> rows = scores.weights.rowwise().sum();
  require((rows.array() - 1.0).abs().maxCoeff() <= tolerance, ErrorKind::kArgument,
          "score matrix rows must sum to 1");
}

void validate(const GlobalFeature& feature, Eigen::Index keypoints) {
  require(feature.activations.size() == segment_count(keypoints), ErrorKind::kArgument,
          "activation count must be K(K-1)/2");
  require(feature.activations.allFinite(), ErrorKind::kNumeric, "non-finite activation strengths");
  require(feature.offset_coefficients.allFinite(), ErrorKind::kNumeric, "non-finite offset coefficients");
}

Model::Model(const ModelConfig& config) : config_(config) {
  std::mt19937_64 rng(config.init_seed);
  encoder_ = Encoder(params_, config.encoder, rng);
  offsets_ = OffsetNetwork(params_, rng);
}

EncodedCloud Model::encode(const PointCloud& cloud) const {
  return encode(cloud, plan_encoder(cloud.points, config_.encoder));
}

EncodedCloud Model::encode(const PointCloud& cloud, const EncoderPlan& plan) const {
  validate(cloud);
  require(cloud.size() >= keypoint_count(), ErrorKind::kArgument,
          "cloud '" + cloud.id + "' has " + std::to_string(cloud.size()) + " points, fewer than K = " +
              std::to_string(keypoint_count()));
  ad::Tape tape;
  nn::Binder bind(tape, params_, false);
  const EncoderOutput out = encoder_(bind, plan, cloud.points);

  EncodedCloud encoded;
  encoded.scores.weights = out.point_scores.value().transpose();
  encoded.feature.activations = out.activations.value().row(0).transpose();
  encoded.feature.offset_coefficients = out.offset_coefficients.value();
  encoded.feature.descriptor = out.descriptor.value().row(0);
  const auto& a = encoded.feature.activations;
  if (!a.allFinite()) {
    Eigen::Index bad = 0;
    while (bad < a.size() && std::isfinite(a(bad))) ++bad;
    throw Error(ErrorKind::kNumeric, "activation " + std::to_string(bad) + " of cloud '" + cloud.id +
                                         "' is not finite; check the checkpoint for diverged parameters");
  }
  validate(encoded.feature, keypoint_count());
  encoded.keypoints = {out.keypoints.value(), cloud.id};
  return encoded;
}

KeypointSet Model::detect(const PointCloud& cloud) const { return encode(cloud).keypoints; }

SkeletonReconstruction reconstruct(const Model& model, const EncodedCloud& encoded) {
  return decode(encoded.keypoints, encoded.feature, model.config().skeleton);
}

DecodedSkeleton decode(const ad::Var& keypoints, const ad::Var& activations, const ad::Var& coefficients,
                       const SkeletonOptions& options) {
  ad::Tape& tape = keypoints.tape();
  DecodedSkeleton out;
  const Points<double> kp = keypoints.value();
  out.layout = plan_skeleton(kp, options);
  require(activations.cols() == out.layout.segment_count() && activations.rows() == 1, ErrorKind::kArgument,
          "activation count does not match the skeleton");
  require(coefficients.rows() == out.layout.segment_count() * kOffsetBasisSize && coefficients.cols() == 3,
          ErrorKind::kArgument, "offset coefficients do not match the skeleton");
  const ad::Var straight = ad::matmul(tape.constant(interpolation_matrix(out.layout)), keypoints);
  out.displacements = ad::matmul(tape.constant(offset_basis_matrix(out.layout)), coefficients);
  out.points = ad::add(straight, out.displacements);
  out.activations = activations;
  return out;
}

}  // namespace mrkp
