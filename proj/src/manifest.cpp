#include "mrkp/manifest.hpp"

#include "mrkp/checkpoint.hpp"
#include "mrkp/io.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>

namespace mrkp {
namespace {

nlohmann::ordered_json body(const RunManifest& m) {
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  const std::string text = to_text(m.config);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    const std::string line = text.substr(pos, end - pos);
    const auto eq = line.find('=');
    config[line.substr(0, eq)] = line.substr(eq + 1);
    pos = end + 1;
  }
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["version"] = m.version;
  j["config"] = config;
  j["dataset"] = {{"fingerprint", m.dataset_fingerprint}, {"size", m.dataset_size}};
  j["flags"] = m.flags;
  j["artifacts"] = m.artifacts;
  return j;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunManifest::id() const { return fnv1a_hex(body(*this).dump()); }

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j = body(*this);
  j["id"] = id();
  j["timestamp"] = timestamp;
  return j.dump(2) + "\n";
}

RunManifest make_manifest(const std::string& command, const TrainConfig& config, const std::string& fingerprint,
                          std::size_t dataset_size) {
  RunManifest m;
  m.command = command;
  m.config = config;
  m.dataset_fingerprint = fingerprint;
  m.dataset_size = dataset_size;
  m.flags = {{"score_normalization", DesignFlags::kScoreNormalization},
             {"cloud_normalization", DesignFlags::kCloudNormalization},
             {"encoder_sampling", DesignFlags::kEncoderSampling},
             {"offset_basis", DesignFlags::kOffsetBasis},
             {"skeletons", std::to_string(segment_count(config.keypoints))},
             {"pairs_per_epoch_resolved", std::to_string(config.resolved_pairs_per_epoch(dataset_size))},
             {"batch_pairs", "1"},
             {"mutual_decoder_heads", to_string(config.mutual_heads)},
             {"miou_matching", "greedy euclidean"}};
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  m.timestamp = buf;
  return m;
}

}  // namespace mrkp
