#include "mrkp/config.hpp"

#include "mrkp/io.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

namespace mrkp {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && ptr == v.data() + v.size() && std::isfinite(out), ErrorKind::kArgument,
          "'" + v + "' is not a finite number");
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && ptr == v.data() + v.size(), ErrorKind::kArgument,
          "'" + v + "' is not a non-negative integer");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorKind::kArgument, "'" + v + "' is not a boolean");
}

struct Field {
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field integer_field(T TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& v) { c.*member = static_cast<T>(to_u64(v)); },
          [member](const TrainConfig& c) { return std::to_string(c.*member); }};
}

Field real_field(std::function<double&(TrainConfig&)> ref) {
  return {[ref](TrainConfig& c, const std::string& v) { ref(c) = to_double(v); },
          [ref](const TrainConfig& c) { return format_double(ref(const_cast<TrainConfig&>(c))); }};
}

Field index_field(std::function<Eigen::Index&(TrainConfig&)> ref) {
  return {[ref](TrainConfig& c, const std::string& v) { ref(c) = static_cast<Eigen::Index>(to_u64(v)); },
          [ref](const TrainConfig& c) { return std::to_string(ref(const_cast<TrainConfig&>(c))); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"category", {[](TrainConfig& c, const std::string& v) {
                      require(!v.empty() && v.find_first_of(" \t") == std::string::npos, ErrorKind::kArgument,
                              "category must be a non-empty token");
                      c.category = v;
                    },
                    [](const TrainConfig& c) { return c.category; }}},
      {"K", index_field([](TrainConfig& c) -> Eigen::Index& { return c.keypoints; })},
      {"points_per_cloud", index_field([](TrainConfig& c) -> Eigen::Index& { return c.points_per_cloud; })},
      {"epochs", integer_field(&TrainConfig::epochs)},
      {"pairs_per_epoch",
       {[](TrainConfig& c, const std::string& v) {
          if (v == "auto") {
            c.pairs_per_epoch.reset();
          } else {
            c.pairs_per_epoch = static_cast<std::size_t>(to_u64(v));
          }
        },
        [](const TrainConfig& c) { return c.pairs_per_epoch ? std::to_string(*c.pairs_per_epoch) : "auto"; }}},
      {"lambda_s", real_field([](TrainConfig& c) -> double& { return c.weights.lambda_self; })},
      {"lambda_m", real_field([](TrainConfig& c) -> double& { return c.weights.lambda_mutual; })},
      {"mu_1", real_field([](TrainConfig& c) -> double& { return c.weights.mu_skeleton_offsets; })},
      {"mu_2", real_field([](TrainConfig& c) -> double& { return c.weights.mu_keypoint_offsets; })},
      {"learning_rate", real_field([](TrainConfig& c) -> double& { return c.learning_rate; })},
      {"optim.beta1", real_field([](TrainConfig& c) -> double& { return c.beta1; })},
      {"optim.beta2", real_field([](TrainConfig& c) -> double& { return c.beta2; })},
      {"optim.epsilon", real_field([](TrainConfig& c) -> double& { return c.epsilon; })},
      {"optim.clip_norm", real_field([](TrainConfig& c) -> double& { return c.clip_norm; })},
      {"seed", integer_field(&TrainConfig::seed)},
      {"mutual.direction", {[](TrainConfig& c, const std::string& v) { c.mutual_direction = parse_mutual_direction(v); },
                            [](const TrainConfig& c) { return to_string(c.mutual_direction); }}},
      {"mutual.heads", {[](TrainConfig& c, const std::string& v) { c.mutual_heads = parse_mutual_heads(v); },
                        [](const TrainConfig& c) { return to_string(c.mutual_heads); }}},
      {"loss.mutual_target", {[](TrainConfig& c, const std::string& v) { c.mutual_target = parse_mutual_target(v); },
                              [](const TrainConfig& c) { return to_string(c.mutual_target); }}},
      {"skeleton.interval", real_field([](TrainConfig& c) -> double& { return c.skeleton.interval; })},
      {"skeleton.cap", index_field([](TrainConfig& c) -> Eigen::Index& { return c.skeleton.cap_per_segment; })},
      {"encoder.sa1_centers", index_field([](TrainConfig& c) -> Eigen::Index& { return c.encoder.sa1_centers; })},
      {"encoder.sa1_radius", real_field([](TrainConfig& c) -> double& { return c.encoder.sa1_radius; })},
      {"encoder.sa1_group", index_field([](TrainConfig& c) -> Eigen::Index& { return c.encoder.sa1_group; })},
      {"encoder.sa2_centers", index_field([](TrainConfig& c) -> Eigen::Index& { return c.encoder.sa2_centers; })},
      {"encoder.sa2_radius", real_field([](TrainConfig& c) -> double& { return c.encoder.sa2_radius; })},
      {"encoder.sa2_group", index_field([](TrainConfig& c) -> Eigen::Index& { return c.encoder.sa2_group; })},
      {"encoder.global_width", index_field([](TrainConfig& c) -> Eigen::Index& { return c.encoder.global_width; })},
      {"diagnostics.mutual_gradient",
       {[](TrainConfig& c, const std::string& v) { c.log_mutual_gradient = to_bool(v); },
        [](const TrainConfig& c) { return std::string(c.log_mutual_gradient ? "true" : "false"); }}},
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& [name, field] : fields()) {
    if (name == key) return &field;
  }
  return nullptr;
}

void assign(TrainConfig& config, const std::string& line) {
  const auto eq = line.find('=');
  require(eq != std::string::npos, ErrorKind::kArgument, "expected key=value, got '" + line + "'");
  const std::string key = trim(line.substr(0, eq));
  const std::string value = trim(line.substr(eq + 1));
  const Field* field = find_field(key);
  require(field != nullptr, ErrorKind::kArgument, "unknown config key '" + key + "'");
  field->set(config, value);
}

}  // namespace

std::string to_string(MutualTarget target) {
  return target == MutualTarget::kInput ? "input" : "self_rec";
}

MutualTarget parse_mutual_target(const std::string& text) {
  if (text == "input") return MutualTarget::kInput;
  if (text == "self_rec") return MutualTarget::kSelfReconstruction;
  throw Error(ErrorKind::kArgument, "loss.mutual_target must be 'input' or 'self_rec', got '" + text + "'");
}

std::string to_string(MutualHeads heads) { return heads == MutualHeads::kSource ? "source" : "target"; }

MutualHeads parse_mutual_heads(const std::string& text) {
  if (text == "source") return MutualHeads::kSource;
  if (text == "target") return MutualHeads::kTarget;
  throw Error(ErrorKind::kArgument, "mutual.heads must be 'source' or 'target', got '" + text + "'");
}

std::size_t TrainConfig::resolved_pairs_per_epoch(std::size_t dataset_size) const {
  return pairs_per_epoch ? *pairs_per_epoch : std::max<std::size_t>(1, dataset_size / 2);
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.encoder = encoder;
  m.encoder.keypoints = keypoints;
  m.skeleton = skeleton;
  m.init_seed = seed;
  return m;
}

void validate(const TrainConfig& c) {
  require(c.keypoints >= 2, ErrorKind::kArgument, "K must be at least 2");
  require(c.points_per_cloud >= c.keypoints, ErrorKind::kArgument, "points_per_cloud must be at least K");
  require(c.epochs >= 1, ErrorKind::kArgument, "epochs must be at least 1");
  require(!c.pairs_per_epoch || *c.pairs_per_epoch >= 1, ErrorKind::kArgument, "pairs_per_epoch must be at least 1");
  validate(c.weights);
  require(c.learning_rate >= 0, ErrorKind::kArgument, "learning_rate must be non-negative");
  require(c.beta1 >= 0 && c.beta1 < 1 && c.beta2 >= 0 && c.beta2 < 1 && c.epsilon > 0, ErrorKind::kArgument,
          "Adam moments need beta in [0, 1) and epsilon > 0");
  require(c.clip_norm > 0, ErrorKind::kArgument, "optim.clip_norm must be positive");
  require(c.skeleton.interval > 0 && c.skeleton.cap_per_segment >= 2, ErrorKind::kArgument,
          "skeleton interval must be positive and cap at least 2");
  EncoderConfig e = c.encoder;
  e.keypoints = c.keypoints;
  validate(e);
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    try {
      assign(config, line);
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  validate(config);
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

std::string to_text(const TrainConfig& config) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + '=' + field.get(config) + '\n';
  return out;
}

void apply_override(TrainConfig& config, const std::string& assignment) {
  assign(config, assignment);
  validate(config);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [name, field] : fields()) keys.push_back(name);
  return keys;
}

bool structurally_compatible(const TrainConfig& a, const TrainConfig& b, std::string* reason) {
  auto fail = [&](const std::string& why) {
    if (reason) *reason = why;
    return false;
  };
  if (a.keypoints != b.keypoints) {
    return fail("K differs (" + std::to_string(a.keypoints) + " vs " + std::to_string(b.keypoints) + ")");
  }
  if (a.points_per_cloud != b.points_per_cloud) return fail("points_per_cloud differs");
  EncoderConfig ea = a.encoder, eb = b.encoder;
  ea.keypoints = eb.keypoints = 0;
  if (!(ea == eb)) return fail("encoder backbone sizes differ");
  return true;
}

}  // namespace mrkp
