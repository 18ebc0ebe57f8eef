#include "mrkp/checkpoint.hpp"

#include "mrkp/io.hpp"

#include <json.hpp>

#include <cstring>

namespace mrkp {
namespace {

constexpr char kMagic[8] = {'M', 'R', 'K', 'P', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_tensor(std::string& out, const std::string& name, const nn::Matrix& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) put<double>(out, m(r, c));
  }
}

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    require(pos_ + n <= data_.size(), ErrorKind::kIncompatible, "checkpoint is truncated");
  }

  const std::string& data_;
  std::size_t pos_ = 0;
};

std::pair<std::string, nn::Matrix> get_tensor(Reader& in) {
  const auto name_len = in.get<std::uint32_t>();
  std::string name = in.bytes(name_len);
  const auto rows = static_cast<Eigen::Index>(in.get<std::uint64_t>());
  const auto cols = static_cast<Eigen::Index>(in.get<std::uint64_t>());
  require(rows >= 0 && cols >= 0 && rows * cols < (Eigen::Index{1} << 32), ErrorKind::kIncompatible,
          "implausible tensor shape in checkpoint");
  nn::Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = in.get<double>();
  }
  return {std::move(name), std::move(m)};
}

nlohmann::json manifest_of(const TrainConfig& c) {
  const auto& e = c.encoder;
  return {{"K", c.keypoints},
          {"backbone",
           {{"sa1_centers", e.sa1_centers},
            {"sa1_radius", e.sa1_radius},
            {"sa1_group", e.sa1_group},
            {"sa2_centers", e.sa2_centers},
            {"sa2_radius", e.sa2_radius},
            {"sa2_group", e.sa2_group},
            {"global_width", e.global_width}}},
          {"score_normalization", DesignFlags::kScoreNormalization},
          {"cloud_normalization", DesignFlags::kCloudNormalization},
          {"encoder_sampling", DesignFlags::kEncoderSampling},
          {"offset_basis", DesignFlags::kOffsetBasis}};
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  require(ck.first_moments.size() == ck.parameters.size() && ck.second_moments.size() == ck.parameters.size(),
          ErrorKind::kArgument, "optimizer moments do not match the parameters");
  nlohmann::json header = {{"config", to_text(ck.config)},
                           {"step", ck.step},
                           {"optimizer_steps", ck.optimizer_steps},
                           {"sampler_state", ck.sampler_state},
                           {"dataset_size", ck.dataset_size},
                           {"dataset_fingerprint", ck.dataset_fingerprint},
                           {"byte_order", "little"},
                           {"manifest", manifest_of(ck.config)}};
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, ck.format_version);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(3 * ck.parameters.size()));
  for (const auto& p : ck.parameters) put_tensor(out, p.name, p.value);
  for (std::size_t i = 0; i < ck.parameters.size(); ++i) {
    put_tensor(out, "adam.m/" + ck.parameters[i].name, ck.first_moments[i]);
  }
  for (std::size_t i = 0; i < ck.parameters.size(); ++i) {
    put_tensor(out, "adam.v/" + ck.parameters[i].name, ck.second_moments[i]);
  }
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  require(std::filesystem::is_regular_file(path), ErrorKind::kIncompatible,
          "checkpoint '" + path.string() + "' does not exist");
  const std::string data = read_file(path);
  Reader in(data);
  require(data.size() >= sizeof(kMagic) && std::memcmp(data.data(), kMagic, sizeof(kMagic)) == 0,
          ErrorKind::kIncompatible, "'" + path.string() + "' is not a checkpoint");
  in.bytes(sizeof(kMagic));
  Checkpoint ck;
  ck.format_version = in.get<std::uint32_t>();
  require(ck.format_version == Checkpoint::kFormatVersion, ErrorKind::kIncompatible,
          "checkpoint format version " + std::to_string(ck.format_version) + " is not supported (expected " +
              std::to_string(Checkpoint::kFormatVersion) + ")");
  const auto header_len = in.get<std::uint64_t>();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.bytes(header_len));
    ck.config = parse_config(header.at("config").get<std::string>());
    ck.step = header.at("step").get<std::uint64_t>();
    ck.optimizer_steps = header.at("optimizer_steps").get<std::int64_t>();
    ck.sampler_state = header.at("sampler_state").get<std::string>();
    ck.dataset_size = header.at("dataset_size").get<std::uint64_t>();
    ck.dataset_fingerprint = header.at("dataset_fingerprint").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kIncompatible, std::string("malformed checkpoint header: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::kIncompatible, std::string("checkpoint config snapshot is invalid: ") + e.what());
  }

  const auto count = in.get<std::uint32_t>();
  require(count % 3 == 0, ErrorKind::kIncompatible, "checkpoint tensor count is inconsistent");
  const std::size_t n = count / 3;
  for (std::size_t i = 0; i < n; ++i) {
    auto [name, m] = get_tensor(in);
    ck.parameters.push_back({std::move(name), std::move(m)});
  }
  for (auto* moments : {&ck.first_moments, &ck.second_moments}) {
    const std::string prefix = moments == &ck.first_moments ? "adam.m/" : "adam.v/";
    for (std::size_t i = 0; i < n; ++i) {
      auto [name, m] = get_tensor(in);
      require(name == prefix + ck.parameters[i].name, ErrorKind::kIncompatible,
              "unexpected tensor '" + name + "' in checkpoint");
      moments->push_back(std::move(m));
    }
  }
  require(in.done(), ErrorKind::kIncompatible, "trailing bytes after checkpoint tensors");
  return ck;
}

Model load_model(const Checkpoint& ck) {
  Model model(ck.config.model_config());
  auto& params = model.parameters();
  require(ck.parameters.size() == params.size(), ErrorKind::kIncompatible,
          "checkpoint holds " + std::to_string(ck.parameters.size()) + " tensors, model expects " +
              std::to_string(params.size()));
  for (const auto& p : ck.parameters) {
    require(params.contains(p.name), ErrorKind::kIncompatible, "checkpoint tensor '" + p.name + "' is unknown");
    auto& slot = params[params.index_of(p.name)].value;
    require(slot.rows() == p.value.rows() && slot.cols() == p.value.cols(), ErrorKind::kIncompatible,
            "tensor '" + p.name + "' has the wrong shape for K = " + std::to_string(ck.config.keypoints));
    slot = p.value;
  }
  return model;
}

}  // namespace mrkp
