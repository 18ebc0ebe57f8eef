#pragma once

#include "mrkp/keypoints.hpp"
#include "mrkp/nn.hpp"

#include <random>
#include <string>
#include <utility>

namespace mrkp {

/// Which keypoint set seeds each reshaped set.
///  forward:  KP1' = KP2 + O_K,  KP2' = KP1 - O_K  (REC1' is scored against P1)
///  mirrored: KP1' = KP1 - O_K,  KP2' = KP2 + O_K  (REC1' is scored against P2)
enum class MutualDirection { kForward, kMirrored };

std::string to_string(MutualDirection direction);
MutualDirection parse_mutual_direction(const std::string& text);

template <typename Scalar>
struct BasicReshapedKeypoints {
  Points<Scalar> kp1_prime;
  Points<Scalar> kp2_prime;
};

template <typename D1, typename D2, typename D3>
BasicReshapedKeypoints<typename D1::Scalar> reshape_keypoints(const Eigen::MatrixBase<D1>& kp1,
                                                              const Eigen::MatrixBase<D2>& kp2,
                                                              const Eigen::MatrixBase<D3>& offsets,
                                                              MutualDirection direction = MutualDirection::kForward) {
  require(kp1.rows() == kp2.rows() && kp1.rows() == offsets.rows() && kp1.cols() == 3 && kp2.cols() == 3 &&
              offsets.cols() == 3,
          ErrorKind::kArgument, "keypoint sets and offsets must share shape K×3");
  if (direction == MutualDirection::kForward) return {kp2 + offsets, kp1 - offsets};
  return {kp1 - offsets, kp2 + offsets};
}

/// Per-channel 3 -> 64 -> 64 -> 3 transformation of the keypoint difference
/// KP1 - KP2. The last layer starts at zero so reshaping starts as a plain swap.
class OffsetNetwork {
 public:
  OffsetNetwork() = default;
  OffsetNetwork(nn::ParameterSet& params, std::mt19937_64& rng);

  /// O_K on the tape; rows are keypoint channels.
  ad::Var operator()(nn::Binder& bind, const ad::Var& kp1, const ad::Var& kp2) const;

  /// O_K without gradients.
  Points<double> operator()(const nn::ParameterSet& params, const Points<double>& kp1,
                            const Points<double>& kp2) const;

  const nn::Mlp& mlp() const { return mlp_; }

 private:
  nn::Mlp mlp_;
};

/// Tape form of reshape_keypoints; returns {KP1', KP2'}.
std::pair<ad::Var, ad::Var> reshape_keypoints(const ad::Var& kp1, const ad::Var& kp2, const ad::Var& offsets,
                                              MutualDirection direction);

}  // namespace mrkp
