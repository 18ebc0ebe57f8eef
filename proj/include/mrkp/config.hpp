#pragma once

#include "mrkp/encoder.hpp"
#include "mrkp/losses.hpp"
#include "mrkp/model.hpp"
#include "mrkp/mutual_align.hpp"
#include "mrkp/skeleton.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mrkp {

/// What the mutual reconstructions are scored against: the input clouds, or the
/// (gradient-stopped) self reconstructions of those clouds.
enum class MutualTarget { kInput, kSelfReconstruction };

std::string to_string(MutualTarget target);
MutualTarget parse_mutual_target(const std::string& text);

/// Whose global feature decodes a reshaped keypoint set: the cloud the keypoints
/// were taken from, or the cloud the reconstruction is scored against.
enum class MutualHeads { kSource, kTarget };
std::string to_string(MutualHeads heads);
MutualHeads parse_mutual_heads(const std::string& text);

struct TrainConfig {
  std::string category = "default";
  Eigen::Index keypoints = 10;
  Eigen::Index points_per_cloud = 2048;
  std::size_t epochs = 80;
  /// Unset means floor(dataset size / 2).
  std::optional<std::size_t> pairs_per_epoch;
  LossWeights weights;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  MutualDirection mutual_direction = MutualDirection::kForward;
  MutualTarget mutual_target = MutualTarget::kInput;
  MutualHeads mutual_heads = MutualHeads::kSource;
  SkeletonOptions skeleton;
  EncoderConfig encoder;
  /// Extra backward pass per step to log the mutual branch's gradient norm.
  bool log_mutual_gradient = false;

  std::size_t resolved_pairs_per_epoch(std::size_t dataset_size) const;
  ModelConfig model_config() const;
};

void validate(const TrainConfig& config);

/// Flat `key=value` lines with dotted keys; `#` starts a comment. Unknown keys
/// and malformed values are parse errors naming the line.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);
std::string to_text(const TrainConfig& config);

/// Applies a single `key=value` assignment.
void apply_override(TrainConfig& config, const std::string& assignment);

/// All recognized keys, in serialization order.
std::vector<std::string> config_keys();

/// Keys whose change makes a checkpoint unusable.
bool structurally_compatible(const TrainConfig& a, const TrainConfig& b, std::string* reason = nullptr);

}  // namespace mrkp
