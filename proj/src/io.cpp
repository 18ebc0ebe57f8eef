#include "mrkp/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace mrkp {
namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

double parse_double(const std::string& token, std::size_t line) {
  double value = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) throw ParseError("non-numeric token '" + token + "'", line);
  if (!std::isfinite(value)) throw ParseError("non-finite value '" + token + "'", line);
  return value;
}

int parse_int(const std::string& token, std::size_t line) {
  int value = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) throw ParseError("non-integer token '" + token + "'", line);
  return value;
}

bool is_blank_or_comment(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open '" + path.string() + "'");
  return in;
}

PointCloud finish(std::vector<double>& coords, std::vector<int>& labels, bool labelled,
                  const std::filesystem::path& path) {
  PointCloud cloud;
  cloud.id = path.stem().string();
  const auto n = static_cast<Eigen::Index>(coords.size() / 3);
  require(n >= 2, ErrorKind::kDegenerateInput,
          "'" + path.string() + "' holds " + std::to_string(n) + " points; at least 2 required");
  cloud.points = Eigen::Map<Points<double>>(coords.data(), n, 3);
  if (labelled) cloud.part_labels = std::move(labels);
  return cloud;
}

PointCloud load_xyz(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<double> coords;
  std::vector<int> labels;
  std::optional<bool> labelled;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto tok = split_ws(line);
    if (tok.size() != 3 && tok.size() != 4) throw ParseError("expected 'x y z [part]'", line_no);
    const bool has_label = tok.size() == 4;
    if (!labelled) labelled = has_label;
    if (*labelled != has_label) throw ParseError("inconsistent part label column", line_no);
    for (int c = 0; c < 3; ++c) coords.push_back(parse_double(tok[static_cast<std::size_t>(c)], line_no));
    if (has_label) labels.push_back(parse_int(tok[3], line_no));
  }
  return finish(coords, labels, labelled.value_or(false), path);
}

PointCloud load_ply(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") throw ParseError("missing 'ply' magic", line_no == 0 ? 1 : line_no);
  long vertex_count = -1;
  bool in_vertex = false;
  std::vector<std::string> vertex_props;
  std::vector<std::pair<std::string, long>> trailing_elements;
  while (true) {
    if (!next_line()) throw ParseError("unterminated header", line_no);
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii") throw ParseError("only ascii ply is supported", line_no);
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError("malformed element line", line_no);
      const long count = parse_int(tok[2], line_no);
      in_vertex = tok[1] == "vertex";
      if (in_vertex) {
        vertex_count = count;
      } else {
        require(vertex_count >= 0, ErrorKind::kParse, "elements before vertex are not supported");
        trailing_elements.emplace_back(tok[1], count);
      }
    } else if (tok[0] == "property") {
      if (tok.size() < 3) throw ParseError("malformed property line", line_no);
      if (in_vertex) {
        if (tok[1] == "list") throw ParseError("list properties on vertices are not supported", line_no);
        vertex_props.push_back(tok.back());
      }
    } else if (tok[0] == "end_header") {
      break;
    } else {
      throw ParseError("unknown header keyword '" + tok[0] + "'", line_no);
    }
  }
  if (vertex_count < 0) throw ParseError("no vertex element", line_no);

  auto index_of = [&](const std::string& name) -> long {
    auto it = std::find(vertex_props.begin(), vertex_props.end(), name);
    return it == vertex_props.end() ? -1 : static_cast<long>(it - vertex_props.begin());
  };
  const long ix = index_of("x"), iy = index_of("y"), iz = index_of("z"), ipart = index_of("part");
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError("vertex element lacks x/y/z", line_no);

  std::vector<double> coords;
  std::vector<int> labels;
  coords.reserve(static_cast<std::size_t>(vertex_count) * 3);
  for (long v = 0; v < vertex_count; ++v) {
    if (!next_line()) throw ParseError("file ends before all vertices were read", line_no + 1);
    const auto tok = split_ws(line);
    if (tok.size() != vertex_props.size()) throw ParseError("vertex record has wrong field count", line_no);
    coords.push_back(parse_double(tok[static_cast<std::size_t>(ix)], line_no));
    coords.push_back(parse_double(tok[static_cast<std::size_t>(iy)], line_no));
    coords.push_back(parse_double(tok[static_cast<std::size_t>(iz)], line_no));
    if (ipart >= 0) labels.push_back(parse_int(tok[static_cast<std::size_t>(ipart)], line_no));
  }
  return finish(coords, labels, ipart >= 0, path);
}

}  // namespace

CloudFormat format_from_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".ply") return CloudFormat::kPlyAscii;
  if (ext == ".xyz" || ext == ".txt") return CloudFormat::kXyzAscii;
  throw Error(ErrorKind::kArgument, "unrecognized point cloud extension '" + ext + "'");
}

PointCloud load_pointcloud(const std::filesystem::path& path, CloudFormat format) {
  return format == CloudFormat::kPlyAscii ? load_ply(path) : load_xyz(path);
}

PointCloud load_pointcloud(const std::filesystem::path& path) {
  return load_pointcloud(path, format_from_extension(path));
}

std::vector<PointCloud> load_directory(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), ErrorKind::kIo, "'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".xyz" || ext == ".ply") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<PointCloud> clouds;
  clouds.reserve(files.size());
  for (const auto& f : files) clouds.push_back(load_pointcloud(f));
  return clouds;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void save_xyz(const PointCloud& cloud, const std::filesystem::path& path) {
  std::string out;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    out += format_double(cloud.points(i, 0)) + ' ' + format_double(cloud.points(i, 1)) + ' ' +
           format_double(cloud.points(i, 2));
    if (cloud.part_labels) out += ' ' + std::to_string((*cloud.part_labels)[static_cast<std::size_t>(i)]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

void save_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
                    "\nproperty double x\nproperty double y\nproperty double z\n";
  if (cloud.part_labels) out += "property int part\n";
  out += "end_header\n";
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    out += format_double(cloud.points(i, 0)) + ' ' + format_double(cloud.points(i, 1)) + ' ' +
           format_double(cloud.points(i, 2));
    if (cloud.part_labels) out += ' ' + std::to_string((*cloud.part_labels)[static_cast<std::size_t>(i)]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

const AnnotatedKeypoint* AnnotationSet::find(int semantic_id) const {
  for (const auto& kp : keypoints) {
    if (kp.semantic_id == semantic_id) return &kp;
  }
  return nullptr;
}

void validate(const AnnotationSet& annotations) {
  std::set<int> seen;
  for (const auto& kp : annotations.keypoints) {
    require(seen.insert(kp.semantic_id).second, ErrorKind::kArgument,
            "duplicate semantic id " + std::to_string(kp.semantic_id) + " in '" + annotations.cloud_id + "'");
    require(kp.position.allFinite(), ErrorKind::kNumeric, "non-finite annotation position");
  }
}

std::map<std::string, AnnotationSet> load_annotations(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::map<std::string, AnnotationSet> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto tok = split_ws(line);
    if (tok.size() != 5) throw ParseError("expected 'cloud_id semantic_id x y z'", line_no);
    auto& set = out[tok[0]];
    set.cloud_id = tok[0];
    AnnotatedKeypoint kp{parse_int(tok[1], line_no),
                         {parse_double(tok[2], line_no), parse_double(tok[3], line_no), parse_double(tok[4], line_no)}};
    if (set.find(kp.semantic_id)) throw ParseError("duplicate semantic id for '" + tok[0] + "'", line_no);
    set.keypoints.push_back(kp);
  }
  return out;
}

void save_annotations(const std::vector<AnnotationSet>& annotations, const std::filesystem::path& path) {
  std::string out = "# cloud_id semantic_id x y z\n";
  for (const auto& set : annotations) {
    for (const auto& kp : set.keypoints) {
      out += set.cloud_id + ' ' + std::to_string(kp.semantic_id) + ' ' + format_double(kp.position.x()) + ' ' +
             format_double(kp.position.y()) + ' ' + format_double(kp.position.z()) + '\n';
    }
  }
  write_file_atomic(path, out);
}

Points<double> load_keypoints(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<double> coords;
  std::string line;
  std::size_t line_no = 0;
  long expected = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto tok = split_ws(line);
    if (tok.size() != 4) throw ParseError("expected 'channel x y z'", line_no);
    if (parse_int(tok[0], line_no) != expected) throw ParseError("channels must be listed 0..K-1 in order", line_no);
    ++expected;
    for (int c = 1; c <= 3; ++c) coords.push_back(parse_double(tok[static_cast<std::size_t>(c)], line_no));
  }
  require(expected >= 1, ErrorKind::kParse, "keypoint file '" + path.string() + "' is empty");
  return Eigen::Map<Points<double>>(coords.data(), expected, 3);
}

void save_keypoints(const Points<double>& keypoints, const std::filesystem::path& path) {
  std::string out;
  for (Eigen::Index k = 0; k < keypoints.rows(); ++k) {
    out += std::to_string(k) + ' ' + format_double(keypoints(k, 0)) + ' ' + format_double(keypoints(k, 1)) + ' ' +
           format_double(keypoints(k, 2)) + '\n';
  }
  write_file_atomic(path, out);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::kIo, "cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    require(static_cast<bool>(out), ErrorKind::kIo, "short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mrkp
