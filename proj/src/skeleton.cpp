#include "mrkp/skeleton.hpp"

#include "mrkp/io.hpp"

namespace mrkp {

Matrix<double> interpolation_matrix(const SkeletonLayout& layout) {
  Matrix<double> m = Matrix<double>::Zero(layout.total_points(), layout.keypoint_count);
  for (Eigen::Index s = 0; s < layout.segment_count(); ++s) {
    const auto [i, j] = layout.endpoints[static_cast<std::size_t>(s)];
    for (Eigen::Index p = layout.segment_begin[s]; p < layout.segment_begin[s + 1]; ++p) {
      const double t = layout.arc[static_cast<std::size_t>(p)];
      m(p, i) += 1.0 - t;
      m(p, j) += t;
    }
  }
  return m;
}

Eigen::Matrix<double, 1, kOffsetBasisSize> offset_basis(double t) {
  const double u = 1.0 - t;
  Eigen::Matrix<double, 1, kOffsetBasisSize> b;
  b << u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t;
  return b;
}

Matrix<double> offset_basis_matrix(const SkeletonLayout& layout) {
  Matrix<double> m = Matrix<double>::Zero(layout.total_points(), layout.segment_count() * kOffsetBasisSize);
  for (Eigen::Index s = 0; s < layout.segment_count(); ++s) {
    for (Eigen::Index p = layout.segment_begin[s]; p < layout.segment_begin[s + 1]; ++p) {
      m.block<1, kOffsetBasisSize>(p, s * kOffsetBasisSize) = offset_basis(layout.arc[static_cast<std::size_t>(p)]);
    }
  }
  return m;
}

SkeletonReconstruction apply_offsets(const SkeletonReconstruction& skeleton, const GlobalFeature& feature) {
  const Eigen::Index segments = skeleton.layout.segment_count();
  require(feature.activations.size() == segments, ErrorKind::kArgument,
          "global feature carries " + std::to_string(feature.activations.size()) + " activations for " +
              std::to_string(segments) + " segments");
  require(feature.offset_coefficients.rows() == segments * kOffsetBasisSize &&
              feature.offset_coefficients.cols() == 3,
          ErrorKind::kArgument, "offset coefficients do not match the skeleton structure");
  SkeletonReconstruction out = skeleton;
  out.points += offset_basis_matrix(skeleton.layout) * feature.offset_coefficients;
  out.activations = feature.activations;
  return out;
}

SkeletonReconstruction decode(const KeypointSet& kp, const GlobalFeature& feature, const SkeletonOptions& options) {
  return apply_offsets(build_skeletons(kp, options), feature);
}

void save_reconstruction_ply(const SkeletonReconstruction& rec, const std::filesystem::path& path) {
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(rec.layout.total_points()) +
                    "\nproperty double x\nproperty double y\nproperty double z\nproperty int segment\n"
                    "property double activation\nend_header\n";
  for (Eigen::Index s = 0; s < rec.layout.segment_count(); ++s) {
    for (Eigen::Index p = rec.layout.segment_begin[s]; p < rec.layout.segment_begin[s + 1]; ++p) {
      out += format_double(rec.points(p, 0)) + ' ' + format_double(rec.points(p, 1)) + ' ' +
             format_double(rec.points(p, 2)) + ' ' + std::to_string(s) + ' ' + format_double(rec.activations(s)) +
             '\n';
    }
  }
  write_file_atomic(path, out);
}

}  // namespace mrkp
