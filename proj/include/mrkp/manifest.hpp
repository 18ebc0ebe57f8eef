#pragma once

#include "mrkp/config.hpp"

#include <map>
#include <string>
#include <vector>

namespace mrkp {

inline constexpr const char* kVersionTag = "mrkp 0.1.0";

/// Provenance record written next to every command's artifacts. The id hashes
/// everything except the timestamp, so reruns share it.
struct RunManifest {
  std::string command;
  TrainConfig config;
  std::string dataset_fingerprint;
  std::size_t dataset_size = 0;
  std::string version = kVersionTag;
  std::map<std::string, std::string> flags;
  std::vector<std::string> artifacts;
  std::string timestamp;

  std::string id() const;
  std::string to_json() const;
};

/// Fills flags with the design choices in effect and stamps the current UTC time.
RunManifest make_manifest(const std::string& command, const TrainConfig& config, const std::string& fingerprint,
                          std::size_t dataset_size);

/// FNV-1a of a byte string, 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace mrkp
