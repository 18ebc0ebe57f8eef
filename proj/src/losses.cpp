#include "mrkp/losses.hpp"

#include <memory>

namespace mrkp {
namespace {

void check_pair(const SkeletonReconstruction& a, const SkeletonReconstruction& b) {
  require(a.layout.keypoint_count == b.layout.keypoint_count, ErrorKind::kArgument,
          "reconstructions were decoded from different keypoint counts");
}

}  // namespace

double self_loss(const PointCloud& p1, const SkeletonReconstruction& rec1, const PointCloud& p2,
                 const SkeletonReconstruction& rec2) {
  check_pair(rec1, rec2);
  return ccd(rec1, p1) + ccd(rec2, p2);
}

double mutual_loss(const PointCloud& p1, const SkeletonReconstruction& rec1_prime, const PointCloud& p2,
                   const SkeletonReconstruction& rec2_prime) {
  check_pair(rec1_prime, rec2_prime);
  return ccd(rec1_prime, p1) + ccd(rec2_prime, p2);
}

void validate(const LossWeights& w) {
  require(w.lambda_self >= 0 && w.lambda_mutual >= 0 && w.mu_skeleton_offsets >= 0 && w.mu_keypoint_offsets >= 0,
          ErrorKind::kArgument, "loss weights must be non-negative");
}

LossBreakdown total_loss(double fidelity, double coverage, double self, double mutual, double skeleton_offset_sq,
                         double keypoint_offset_sq, const LossWeights& weights) {
  validate(weights);
  LossBreakdown out;
  out.fidelity = fidelity;
  out.coverage = coverage;
  out.self_loss = self;
  out.mutual_loss = mutual;
  out.reg_skeleton_offsets = weights.mu_skeleton_offsets * skeleton_offset_sq;
  out.reg_keypoint_offsets = weights.mu_keypoint_offsets * keypoint_offset_sq;
  out.total = weights.lambda_self * self + weights.lambda_mutual * mutual + out.reg_skeleton_offsets +
              out.reg_keypoint_offsets;
  return out;
}

std::string first_non_finite(const LossBreakdown& l) {
  const std::pair<const char*, double> fields[] = {
      {"fidelity", l.fidelity},          {"coverage", l.coverage},
      {"self", l.self_loss},             {"mutual", l.mutual_loss},
      {"reg_skeleton_offsets", l.reg_skeleton_offsets}, {"reg_keypoint_offsets", l.reg_keypoint_offsets},
      {"total", l.total}};
  for (const auto& [name, value] : fields) {
    if (!std::isfinite(value)) return name;
  }
  return {};
}

ad::Var ccd_terms(const ad::Var& points, const ad::Var& activations, const SkeletonLayout& layout,
                  const Points<double>& target) {
  require(&points.tape() == &activations.tape(), ErrorKind::kArgument, "vars live on different tapes");
  require(points.cols() == 3 && points.rows() == layout.total_points(), ErrorKind::kArgument,
          "reconstruction points do not match the skeleton layout");
  require(activations.rows() == 1 && activations.cols() == layout.segment_count(), ErrorKind::kArgument,
          "activations do not match the skeleton layout");

  SkeletonReconstruction rec;
  rec.layout = layout;
  rec.points = points.value();
  rec.activations = activations.value().row(0).transpose();

  const bool needs_grad = points.requires_grad() || activations.requires_grad();
  ad::Matrix out(1, 2);
  if (!needs_grad) {
    const auto terms = ccd_terms(rec, target);
    out << terms.fidelity, terms.coverage;
    return points.tape().constant(std::move(out));
  }

  // Term gradients stay separate so upstream can weight fidelity and coverage independently.
  auto parts = std::make_shared<std::pair<ReconstructionGradient<double>, ReconstructionGradient<double>>>();
  out << fidelity_loss(rec, target, &parts->first), coverage_loss(rec, target, &parts->second);
  return points.tape().record(std::move(out), {points, activations},
                              [points, activations, parts](ad::Tape& t, const ad::Matrix& g) {
                                const double wf = g(0, 0), wc = g(0, 1);
                                if (points.requires_grad()) {
                                  t.accumulate(points, ad::Matrix(wf * parts->first.points + wc * parts->second.points));
                                }
                                if (activations.requires_grad()) {
                                  t.accumulate(activations,
                                               (wf * parts->first.activations + wc * parts->second.activations).transpose());
                                }
                              });
}

}  // namespace mrkp
