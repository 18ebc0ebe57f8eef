#pragma once

#include "mrkp/keypoints.hpp"
#include "mrkp/nn.hpp"

#include <random>
#include <vector>

namespace mrkp {

/// Hierarchical set-abstraction backbone sizes. Level sizes shrink to the
/// available point count on small clouds.
struct EncoderConfig {
  Eigen::Index keypoints = 10;
  Eigen::Index sa1_centers = 512;
  double sa1_radius = 0.2;
  Eigen::Index sa1_group = 32;
  Eigen::Index sa2_centers = 128;
  double sa2_radius = 0.4;
  Eigen::Index sa2_group = 32;
  Eigen::Index global_width = 256;

  bool operator==(const EncoderConfig&) const = default;
};

void validate(const EncoderConfig& config);

/// Neighborhoods and interpolation weights of one cloud. Depends only on the
/// point set (not its order), so it is computed once per cloud and reused.
struct EncoderPlan {
  Eigen::Index point_count = 0;
  std::vector<Eigen::Index> centers1;  // into the cloud
  std::vector<Eigen::Index> group1;    // into the cloud, sa1_group per center
  ad::Matrix relative1;                // group member minus its center
  std::vector<Eigen::Index> centers2;  // into centers1
  std::vector<Eigen::Index> group2;    // into centers1
  ad::Matrix relative2;
  ad::Matrix xyz2;
  ad::IndexMatrix up2_index;  // level-1 centers <- level-2 centers
  ad::Matrix up2_weight;
  ad::IndexMatrix up1_index;  // cloud points <- level-1 centers
  ad::Matrix up1_weight;
};

EncoderPlan plan_encoder(const Points<double>& points, const EncoderConfig& config);

/// Up to `group` nearest source points within `radius` of each center, nearest
/// first; short neighborhoods repeat their nearest member. Equal distances are
/// ordered by coordinates.
std::vector<Eigen::Index> ball_group(const Points<double>& source, const Points<double>& centers, double radius,
                                     Eigen::Index group);

/// Inverse-distance weights over the 3 nearest sources of each target.
void three_nn_weights(const Points<double>& source, const Points<double>& target, ad::IndexMatrix& index,
                      ad::Matrix& weight);

/// Tape outputs of one forward pass.
struct EncoderOutput {
  ad::Var point_scores;  // N×K; each column sums to 1 (the transposed score matrix)
  ad::Var keypoints;     // K×3
  ad::Var activations;   // 1×K(K-1)/2, in (0, 1)
  ad::Var offset_coefficients;  // (S·B)×3
  ad::Var descriptor;    // 1×global_width
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(nn::ParameterSet& params, const EncoderConfig& config, std::mt19937_64& rng);

  EncoderOutput operator()(nn::Binder& bind, const EncoderPlan& plan, const Points<double>& points) const;

  const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;
  nn::Mlp sa1_, sa2_, sa3_;
  nn::Mlp fp3_, fp2_, fp1_;
  nn::Linear head_;
  nn::Linear activation_head_;
  nn::Linear offset_head_;
};

}  // namespace mrkp
