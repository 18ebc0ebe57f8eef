#pragma once

#include "mrkp/io.hpp"
#include "mrkp/keypoints.hpp"
#include "mrkp/point_cloud.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mrkp {

/// Nearest channel to `position`; equal distances go to the lowest channel.
Eigen::Index nearest_channel(const Points<double>& keypoints, const Vector3<double>& position);

/// Dual alignment score of one (source, reference) pair over the semantic ids
/// annotated on both. Throws kUndefinedMetric when they share none.
double das(const KeypointSet& pred_src, const KeypointSet& pred_ref, const AnnotationSet& ann_src,
           const AnnotationSet& ann_ref);

/// Greedy one-to-one matching: repeatedly takes the globally closest
/// (prediction, annotation) pair within `tau`. Ties go to the lower prediction,
/// then the lower annotation index.
std::vector<std::pair<Eigen::Index, std::size_t>> greedy_match(const Points<double>& predicted,
                                                              const AnnotationSet& annotations, double tau);

/// IoU of one object: matches / (K + |ann| - matches).
double keypoint_iou(const KeypointSet& pred, const AnnotationSet& ann, double tau);

/// Mean IoU over objects; `preds` and `anns` are aligned.
double miou(const std::vector<KeypointSet>& preds, const std::vector<const AnnotationSet*>& anns, double tau);
inline double miou(const KeypointSet& pred, const AnnotationSet& ann, double tau) { return keypoint_iou(pred, ann, tau); }

/// Fraction of channels whose nearest-point part label agrees across the two objects.
double part_correspondence(const KeypointSet& pred_a, const PointCloud& cloud_a, const KeypointSet& pred_b,
                           const PointCloud& cloud_b);

using Detector = std::function<Points<double>(const PointCloud&)>;

struct RepeatabilityPoint {
  double sigma = 0;
  double ratio = 0;
};

/// For each sigma, detects on every clean cloud and on a seeded noisy copy and
/// counts channels displaced by at most `threshold`. Sigmas must ascend.
std::vector<RepeatabilityPoint> repeatability(const Detector& detector, const std::vector<PointCloud>& clouds,
                                              const std::vector<double>& sigmas, double threshold = 0.1,
                                              std::uint64_t seed = 0);

void validate_sigmas(const std::vector<double>& sigmas);

// Dataset-level evaluation.

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"das", "miou", "part_corr", "repeatability"};
  return names;
}

/// Comma-separated names; unknown names are argument errors listing the valid ones.
std::set<std::string> parse_metric_names(const std::string& text);

struct EvalOptions {
  double tau = 0.1;
  std::size_t das_reference_draws = 10;
  std::size_t part_pairs = 100;
  double repeat_threshold = 0.1;
  std::vector<double> sigmas = {0.0, 0.01, 0.02, 0.03, 0.04, 0.05};
  std::uint64_t seed = 0;
};

struct CategoryScores {
  std::optional<double> das;
  std::optional<double> miou;
  std::optional<double> part_corr;
  std::size_t objects = 0;
  std::size_t das_pairs = 0;      // pairs that entered the DAS mean
  std::size_t das_undefined = 0;  // pairs without common semantic ids
  std::size_t part_pairs = 0;
};

struct MetricsReport {
  std::map<std::string, CategoryScores> per_category;
  std::vector<RepeatabilityPoint> repeatability_curve;
  EvalOptions options;
  std::set<std::string> metrics;

  /// Arithmetic mean over the categories where the metric is defined.
  std::optional<double> mean_das() const;
  std::optional<double> mean_miou() const;
  std::optional<double> mean_part_corr() const;

  /// Table-style text; the header states tau and the sampling counts.
  std::string to_text() const;
  std::string to_json() const;
};

/// One category's objects: clouds, their predicted keypoints, and annotations
/// keyed by cloud id (objects without annotations are skipped by DAS / mIoU).
CategoryScores evaluate_category(const std::vector<PointCloud>& clouds, const std::vector<KeypointSet>& preds,
                                 const std::map<std::string, AnnotationSet>& annotations,
                                 const std::set<std::string>& metrics, const EvalOptions& options);

}  // namespace mrkp
