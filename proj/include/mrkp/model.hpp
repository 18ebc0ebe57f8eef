#pragma once

#include "mrkp/encoder.hpp"
#include "mrkp/mutual_align.hpp"
#include "mrkp/skeleton.hpp"

#include <cstdint>

namespace mrkp {

struct ModelConfig {
  EncoderConfig encoder;
  SkeletonOptions skeleton;
  std::uint64_t init_seed = 0;
};

struct EncodedCloud {
  ScoreMatrix scores;
  GlobalFeature feature;
  KeypointSet keypoints;
};

/// Encoder, keypoint-offset network and decoder heads with their parameters.
class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  Eigen::Index keypoint_count() const { return config_.encoder.keypoints; }

  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }
  const Encoder& encoder() const { return encoder_; }
  const OffsetNetwork& offset_network() const { return offsets_; }

  /// Gradient-free forward pass of one cloud.
  EncodedCloud encode(const PointCloud& cloud) const;
  EncodedCloud encode(const PointCloud& cloud, const EncoderPlan& plan) const;
  KeypointSet detect(const PointCloud& cloud) const;

 private:
  ModelConfig config_;
  nn::ParameterSet params_;
  Encoder encoder_;
  OffsetNetwork offsets_;
};

/// encode() followed by a decode of the cloud's own keypoints.
SkeletonReconstruction reconstruct(const Model& model, const EncodedCloud& encoded);

/// Skeleton reconstruction on the tape.
struct DecodedSkeleton {
  SkeletonLayout layout;
  ad::Var points;         // T×3
  ad::Var displacements;  // T×3 learned offsets
  ad::Var activations;    // 1×S
};

/// Segment point counts come from the current keypoint values; the
/// coordinates stay differentiable in keypoints and offset coefficients.
DecodedSkeleton decode(const ad::Var& keypoints, const ad::Var& activations, const ad::Var& coefficients,
                       const SkeletonOptions& options);

}  // namespace mrkp
