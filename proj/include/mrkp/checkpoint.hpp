#pragma once

#include "mrkp/config.hpp"
#include "mrkp/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mrkp {

/// Everything needed to continue training or run inference: parameters by
/// name, Adam moments, the pair-stream position and the config snapshot.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t format_version = kFormatVersion;
  TrainConfig config;
  std::vector<nn::Parameter> parameters;
  std::int64_t optimizer_steps = 0;
  std::vector<nn::Matrix> first_moments;
  std::vector<nn::Matrix> second_moments;
  std::uint64_t step = 0;
  std::string sampler_state;
  std::uint64_t dataset_size = 0;
  std::string dataset_fingerprint;
};

/// Binary container: magic, format version, a JSON header (config snapshot,
/// counters, manifest of K / backbone sizes / normalization choices), then
/// named float64 tensors. Written atomically.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

/// Throws an incompatible-artifact error on bad magic, version mismatch or
/// missing tensors.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model described by the config snapshot and loads its tensors.
Model load_model(const Checkpoint& checkpoint);

/// Design choices a checkpoint records beside the config.
struct DesignFlags {
  static constexpr const char* kScoreNormalization = "softmax";
  static constexpr const char* kCloudNormalization = "per-object unit box";
  static constexpr const char* kEncoderSampling = "canonical farthest point";
  static constexpr const char* kOffsetBasis = "cubic bernstein";
};

}  // namespace mrkp
