#pragma once

#include "mrkp/point_cloud.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mrkp {

enum class CloudFormat { kXyzAscii, kPlyAscii };

/// Picks the format from the file extension (.xyz / .txt / .ply).
CloudFormat format_from_extension(const std::filesystem::path& path);

/// Reads an xyz-ascii (`x y z [part]` per line) or ascii ply file. The cloud id
/// is the file stem.
PointCloud load_pointcloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_pointcloud(const std::filesystem::path& path);

/// Loads every .xyz/.ply file directly inside `dir`, sorted by file name.
std::vector<PointCloud> load_directory(const std::filesystem::path& dir);

void save_xyz(const PointCloud& cloud, const std::filesystem::path& path);
void save_ply(const PointCloud& cloud, const std::filesystem::path& path);

struct AnnotatedKeypoint {
  int semantic_id;
  Vector3<double> position;
};

/// Human keypoint annotations for one cloud; semantic ids are unique.
struct AnnotationSet {
  std::string cloud_id;
  std::vector<AnnotatedKeypoint> keypoints;

  const AnnotatedKeypoint* find(int semantic_id) const;
};

void validate(const AnnotationSet& annotations);

/// Annotation file: one record `cloud_id semantic_id x y z` per line; `#` starts a comment.
std::map<std::string, AnnotationSet> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::vector<AnnotationSet>& annotations, const std::filesystem::path& path);

/// Keypoint file: K records `channel x y z`, channels 0..K-1 in order.
Points<double> load_keypoints(const std::filesystem::path& path);
void save_keypoints(const Points<double>& keypoints, const std::filesystem::path& path);

/// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace mrkp
