#pragma once

#include "mrkp/autodiff.hpp"
#include "mrkp/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace mrkp {

/// Gradient of a reconstruction loss with respect to the reconstruction points
/// and the per-segment activations.
template <typename Scalar>
struct ReconstructionGradient {
  Points<Scalar> points;
  Vector<Scalar> activations;

  void reset(Eigen::Index point_count, Eigen::Index segment_count) {
    points = Points<Scalar>::Zero(point_count, 3);
    activations = Vector<Scalar>::Zero(segment_count);
  }
};

namespace detail {

template <typename Scalar>
void check_reconstruction(const BasicSkeletonReconstruction<Scalar>& rec, const Points<Scalar>& target) {
  require(target.rows() > 0, ErrorKind::kArgument, "target cloud is empty");
  require(rec.points.rows() > 0 && rec.layout.segment_count() > 0, ErrorKind::kArgument, "reconstruction is empty");
  require(rec.points.rows() == rec.layout.total_points() && rec.activations.size() == rec.layout.segment_count(),
          ErrorKind::kArgument, "reconstruction points or activations do not match its layout");
}

template <typename Scalar>
Scalar min_squared_distance(const Points<Scalar>& cloud, Eigen::Index begin, Eigen::Index end,
                            const Eigen::Matrix<Scalar, 1, 3>& p, Eigen::Index& argmin) {
  Scalar best = std::numeric_limits<Scalar>::infinity();
  argmin = begin;
  for (Eigen::Index i = begin; i < end; ++i) {
    const Scalar d = (cloud.row(i) - p).squaredNorm();
    if (d < best) {
      best = d;
      argmin = i;
    }
  }
  return best;
}

}  // namespace detail

/// Σ_i a_i Σ_{p̂ ∈ segment i} min_{p ∈ target} ‖p̂ − p‖. Nearest-neighbor ties
/// resolve to the lowest target index.
template <typename Scalar>
Scalar fidelity_loss(const BasicSkeletonReconstruction<Scalar>& rec, const Points<Scalar>& target,
                     ReconstructionGradient<Scalar>* grad = nullptr) {
  detail::check_reconstruction(rec, target);
  const auto& layout = rec.layout;
  if (grad) grad->reset(rec.points.rows(), layout.segment_count());
  Scalar loss = 0;
  for (Eigen::Index s = 0; s < layout.segment_count(); ++s) {
    Scalar segment_sum = 0;
    const Scalar a = rec.activations(s);
    for (Eigen::Index p = layout.segment_begin[s]; p < layout.segment_begin[s + 1]; ++p) {
      const Eigen::Matrix<Scalar, 1, 3> q = rec.points.row(p);
      Eigen::Index nearest = 0;
      const Scalar d = std::sqrt(detail::min_squared_distance(target, 0, target.rows(), q, nearest));
      segment_sum += d;
      if (grad && d > Scalar(0)) grad->points.row(p) += a * (q - target.row(nearest)) / d;
    }
    loss += a * segment_sum;
    if (grad) grad->activations(s) = segment_sum;
  }
  return loss;
}

/// For every target point, segments are visited nearest first until their
/// activations reach 1; the last visited weight is clipped so the weights sum to
/// exactly 1 (all segments count with their full activation when the total stays
/// below 1). The point contributes the weighted sum of its segment distances.
/// Equal distances keep segment order.
template <typename Scalar>
Scalar coverage_loss(const BasicSkeletonReconstruction<Scalar>& rec, const Points<Scalar>& target,
                     ReconstructionGradient<Scalar>* grad = nullptr) {
  detail::check_reconstruction(rec, target);
  require(rec.activations.sum() > Scalar(0), ErrorKind::kArgument, "activations sum to zero");
  const auto& layout = rec.layout;
  const Eigen::Index segments = layout.segment_count();
  if (grad) grad->reset(rec.points.rows(), segments);

  std::vector<Scalar> dist(static_cast<std::size_t>(segments));
  std::vector<Eigen::Index> nearest(static_cast<std::size_t>(segments));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(segments));
  std::vector<Scalar> weight(static_cast<std::size_t>(segments));
  Scalar loss = 0;
  for (Eigen::Index j = 0; j < target.rows(); ++j) {
    const Eigen::Matrix<Scalar, 1, 3> p = target.row(j);
    for (Eigen::Index s = 0; s < segments; ++s) {
      dist[s] = std::sqrt(detail::min_squared_distance(rec.points, layout.segment_begin[s],
                                                       layout.segment_begin[s + 1], p, nearest[s]));
    }
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return dist[a] < dist[b]; });

    Scalar accumulated = 0;
    Scalar contribution = 0;
    std::size_t used = 0;
    bool clipped = false;
    for (; used < order.size(); ++used) {
      const Eigen::Index s = order[used];
      const Scalar a = rec.activations(s);
      if (accumulated + a >= Scalar(1)) {
        weight[used] = Scalar(1) - accumulated;
        contribution += weight[used] * dist[s];
        clipped = true;
        ++used;
        break;
      }
      weight[used] = a;
      contribution += a * dist[s];
      accumulated += a;
    }
    loss += contribution;
    if (!grad) continue;

    const Scalar last_distance = dist[order[used - 1]];
    for (std::size_t k = 0; k < used; ++k) {
      const Eigen::Index s = order[k];
      if (!clipped) {
        grad->activations(s) += dist[s];
      } else if (k + 1 < used) {
        grad->activations(s) += dist[s] - last_distance;
      }
      if (dist[s] > Scalar(0)) {
        const Eigen::Index q = nearest[s];
        grad->points.row(q) += weight[k] * (rec.points.row(q) - p) / dist[s];
      }
    }
  }
  return loss;
}

template <typename Scalar>
struct CcdTerms {
  Scalar fidelity = 0;
  Scalar coverage = 0;

  Scalar total() const { return fidelity + coverage; }
};

/// Composite Chamfer distance: fidelity plus coverage. `grad` receives the sum
/// of both gradients.
template <typename Scalar>
CcdTerms<Scalar> ccd_terms(const BasicSkeletonReconstruction<Scalar>& rec, const Points<Scalar>& target,
                           ReconstructionGradient<Scalar>* grad = nullptr) {
  CcdTerms<Scalar> terms;
  if (!grad) {
    terms.fidelity = fidelity_loss(rec, target);
    terms.coverage = coverage_loss(rec, target);
    return terms;
  }
  ReconstructionGradient<Scalar> g_cov;
  terms.fidelity = fidelity_loss(rec, target, grad);
  terms.coverage = coverage_loss(rec, target, &g_cov);
  grad->points += g_cov.points;
  grad->activations += g_cov.activations;
  return terms;
}

template <typename Scalar>
Scalar ccd(const BasicSkeletonReconstruction<Scalar>& rec, const Points<Scalar>& target) {
  return ccd_terms(rec, target).total();
}

inline double fidelity_loss(const SkeletonReconstruction& rec, const PointCloud& target) {
  return fidelity_loss(rec, target.points);
}
inline double coverage_loss(const SkeletonReconstruction& rec, const PointCloud& target) {
  return coverage_loss(rec, target.points);
}
inline double ccd(const SkeletonReconstruction& rec, const PointCloud& target) { return ccd(rec, target.points); }

/// CCD(P1, REC1) + CCD(P2, REC2).
double self_loss(const PointCloud& p1, const SkeletonReconstruction& rec1, const PointCloud& p2,
                 const SkeletonReconstruction& rec2);

/// CCD(P1, REC1') + CCD(P2, REC2'); the targets are the input clouds.
double mutual_loss(const PointCloud& p1, const SkeletonReconstruction& rec1_prime, const PointCloud& p2,
                   const SkeletonReconstruction& rec2_prime);

struct LossWeights {
  double lambda_self = 0.5;
  double lambda_mutual = 0.5;
  double mu_skeleton_offsets = 0.01;
  double mu_keypoint_offsets = 0.01;
};

void validate(const LossWeights& weights);

/// Per-step loss record. The regularizer fields hold the weighted terms, so
/// total = λ_s·self + λ_m·mutual + reg_skeleton_offsets + reg_keypoint_offsets.
/// fidelity and coverage sum over every CCD evaluated in the step.
struct LossBreakdown {
  double fidelity = 0;
  double coverage = 0;
  double self_loss = 0;
  double mutual_loss = 0;
  double reg_skeleton_offsets = 0;
  double reg_keypoint_offsets = 0;
  double total = 0;

  bool operator==(const LossBreakdown&) const = default;
};

/// `skeleton_offset_sq` and `keypoint_offset_sq` are the squared L2 norms of the
/// decoder displacements and of the keypoint offsets.
LossBreakdown total_loss(double fidelity, double coverage, double self, double mutual, double skeleton_offset_sq,
                         double keypoint_offset_sq, const LossWeights& weights);

/// Names the first non-finite component, or returns an empty string.
std::string first_non_finite(const LossBreakdown& losses);

/// Tape op returning [fidelity, coverage] (1×2) of a reconstruction against a
/// fixed target. `points` is T×3 and `activations` 1×S.
ad::Var ccd_terms(const ad::Var& points, const ad::Var& activations, const SkeletonLayout& layout,
                  const Points<double>& target);

}  // namespace mrkp
