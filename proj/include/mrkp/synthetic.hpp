#pragma once

#include "mrkp/io.hpp"
#include "mrkp/point_cloud.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mrkp {

enum class ShapeFamily { kBox, kTee, kCross, kAirplaneToy };

std::string to_string(ShapeFamily family);
ShapeFamily parse_shape_family(const std::string& text);

struct Range {
  double lo = 0;
  double hi = 0;
};

/// Wire shapes sampled with Gaussian tube jitter. `length` drives the main
/// member (box x-extent, tee bar, cross horizontal arm, fuselage) and `width`
/// the secondary one (box y/z, tee stem, cross vertical arm, wing span).
struct SyntheticSpec {
  ShapeFamily family = ShapeFamily::kTee;
  Range length{0.8, 1.2};
  Range width{0.5, 0.9};
  double jitter = 0.005;
  Eigen::Index points_per_cloud = 2048;
  std::uint64_t seed = 0;
};

void validate(const SyntheticSpec& spec);

/// Structural points per instance: box 8 corners, tee 4 (bar ends, junction,
/// stem foot), cross 5 (center, arm ends), airplane-toy 5 (nose, tail, wing
/// tips, fin tip).
Eigen::Index annotation_count(ShapeFamily family);
int part_count(ShapeFamily family);

struct SyntheticDataset {
  std::vector<PointCloud> clouds;
  std::vector<AnnotationSet> annotations;  // aligned with clouds
};

/// Clouds come out unit-box normalized; annotations go through the same map.
/// Points near an annotated point take the part that owns it (box corners
/// belong to the pillars, tee and cross junctions to the bar / horizontal arm).
SyntheticDataset generate(const SyntheticSpec& spec, std::size_t count);

/// `<id>.xyz` per cloud plus `annotations.txt`.
void save_dataset(const SyntheticDataset& data, const std::filesystem::path& dir);

}  // namespace mrkp
