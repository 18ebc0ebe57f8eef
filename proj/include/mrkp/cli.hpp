#pragma once

#include "mrkp/point_cloud.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mrkp {

/// Exit statuses of the command-line tool.
enum ExitStatus : int { kExitOk = 0, kExitUsage = 2, kExitIncompatible = 3, kExitNumeric = 4 };

int exit_status(ErrorKind kind);

/// A cloud brought into the model frame: unit-box normalized per object and,
/// when larger than `points`, downsampled by seeded farthest point sampling.
struct FramedCloud {
  PointCloud cloud;
  UnitBoxTransform<double> map;

  Points<double> to_model(const Points<double>& p) const { return map.apply(p); }
  Points<double> to_input(const Points<double>& p) const;
};

FramedCloud frame_cloud(const PointCloud& cloud, Eigen::Index points, std::uint64_t seed);

/// Fixed 10-color palette keyed by channel index.
std::array<unsigned char, 3> channel_color(Eigen::Index channel);

/// Entry point of the `mrkp` tool; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mrkp
