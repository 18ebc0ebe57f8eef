#include "mrkp/encoder.hpp"

#include "mrkp/skeleton.hpp"

#include <algorithm>
#include <cmath>

namespace mrkp {
namespace {

bool coordinate_less(const Points<double>& pts, Eigen::Index a, Eigen::Index b) {
  return detail::lexicographically_less(pts, a, b);
}

Points<double> gather_points(const Points<double>& pts, const std::vector<Eigen::Index>& idx) {
  Points<double> out(static_cast<Eigen::Index>(idx.size()), 3);
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = pts.row(idx[k]);
  return out;
}

ad::Matrix relative_coordinates(const Points<double>& source, const Points<double>& centers,
                                const std::vector<Eigen::Index>& group, Eigen::Index group_size, double radius) {
  ad::Matrix rel(static_cast<Eigen::Index>(group.size()), 3);
  for (std::size_t r = 0; r < group.size(); ++r) {
    const auto center = static_cast<Eigen::Index>(r) / group_size;
    rel.row(static_cast<Eigen::Index>(r)) = (source.row(group[r]) - centers.row(center)) / radius;
  }
  return rel;
}

}  // namespace

void validate(const EncoderConfig& c) {
  require(c.keypoints >= 2, ErrorKind::kArgument, "keypoint count must be at least 2");
  require(c.sa1_centers >= 1 && c.sa2_centers >= 1 && c.sa1_group >= 1 && c.sa2_group >= 1 && c.global_width >= 1,
          ErrorKind::kArgument, "encoder sizes must be positive");
  require(c.sa1_radius > 0 && c.sa2_radius > 0, ErrorKind::kArgument, "ball radii must be positive");
}

std::vector<Eigen::Index> ball_group(const Points<double>& source, const Points<double>& centers, double radius,
                                     Eigen::Index group) {
  const double r2 = radius * radius;
  std::vector<Eigen::Index> out;
  out.reserve(static_cast<std::size_t>(centers.rows() * group));
  std::vector<std::pair<double, Eigen::Index>> candidates;
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    candidates.clear();
    Eigen::Index nearest = 0;
    double nearest_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < source.rows(); ++i) {
      const double d = (source.row(i) - centers.row(c)).squaredNorm();
      if (d <= r2) candidates.emplace_back(d, i);
      if (d < nearest_d || (d == nearest_d && coordinate_less(source, i, nearest))) {
        nearest_d = d;
        nearest = i;
      }
    }
    if (candidates.empty()) candidates.emplace_back(nearest_d, nearest);
    auto less = [&](const auto& a, const auto& b) {
      return a.first < b.first || (a.first == b.first && coordinate_less(source, a.second, b.second));
    };
    const auto take = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(group));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(),
                      less);
    for (std::size_t k = 0; k < static_cast<std::size_t>(group); ++k) {
      out.push_back(candidates[k < take ? k : 0].second);
    }
  }
  return out;
}

void three_nn_weights(const Points<double>& source, const Points<double>& target, ad::IndexMatrix& index,
                      ad::Matrix& weight) {
  const Eigen::Index k = std::min<Eigen::Index>(3, source.rows());
  index.resize(target.rows(), k);
  weight.resize(target.rows(), k);
  std::vector<std::pair<double, Eigen::Index>> cand(static_cast<std::size_t>(source.rows()));
  for (Eigen::Index t = 0; t < target.rows(); ++t) {
    for (Eigen::Index i = 0; i < source.rows(); ++i) {
      cand[static_cast<std::size_t>(i)] = {(source.row(i) - target.row(t)).squaredNorm(), i};
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), [&](const auto& a, const auto& b) {
      return a.first < b.first || (a.first == b.first && coordinate_less(source, a.second, b.second));
    });
    double total = 0;
    for (Eigen::Index j = 0; j < k; ++j) {
      index(t, j) = cand[static_cast<std::size_t>(j)].second;
      weight(t, j) = 1.0 / (std::sqrt(cand[static_cast<std::size_t>(j)].first) + 1e-8);
      total += weight(t, j);
    }
    weight.row(t) /= total;
  }
}

EncoderPlan plan_encoder(const Points<double>& points, const EncoderConfig& config) {
  validate(config);
  require(points.rows() >= config.keypoints, ErrorKind::kArgument,
          "cloud has " + std::to_string(points.rows()) + " points but " + std::to_string(config.keypoints) +
              " keypoints were requested");
  require(points.allFinite(), ErrorKind::kNumeric, "cloud has non-finite coordinates");

  EncoderPlan plan;
  plan.point_count = points.rows();
  const Eigen::Index c1 = std::min(config.sa1_centers, points.rows());
  plan.centers1 = canonical_farthest_point_indices(points, c1);
  const Points<double> xyz1 = gather_points(points, plan.centers1);
  plan.group1 = ball_group(points, xyz1, config.sa1_radius, config.sa1_group);
  plan.relative1 = relative_coordinates(points, xyz1, plan.group1, config.sa1_group, config.sa1_radius);

  const Eigen::Index c2 = std::min(config.sa2_centers, c1);
  plan.centers2 = canonical_farthest_point_indices(xyz1, c2);
  const Points<double> xyz2 = gather_points(xyz1, plan.centers2);
  plan.group2 = ball_group(xyz1, xyz2, config.sa2_radius, config.sa2_group);
  plan.relative2 = relative_coordinates(xyz1, xyz2, plan.group2, config.sa2_group, config.sa2_radius);
  plan.xyz2 = xyz2;

  three_nn_weights(xyz2, xyz1, plan.up2_index, plan.up2_weight);
  three_nn_weights(xyz1, points, plan.up1_index, plan.up1_weight);
  return plan;
}

Encoder::Encoder(nn::ParameterSet& params, const EncoderConfig& config, std::mt19937_64& rng) : config_(config) {
  validate(config);
  const Eigen::Index gw = config.global_width;
  sa1_ = nn::make_mlp(params, "encoder.sa1", 3, {32, 32, 64}, rng);
  sa2_ = nn::make_mlp(params, "encoder.sa2", 3 + 64, {64, 64, 128}, rng);
  sa3_ = nn::make_mlp(params, "encoder.sa3", 3 + 128, {128, gw}, rng);
  fp3_ = nn::make_mlp(params, "encoder.fp3", gw + 128, {128}, rng);
  fp2_ = nn::make_mlp(params, "encoder.fp2", 128 + 64, {128}, rng);
  fp1_ = nn::make_mlp(params, "encoder.fp1", 128 + 3, {64, 64}, rng);
  head_ = nn::make_linear(params, "encoder.head", 64, config.keypoints, rng);
  const Eigen::Index segments = segment_count(config.keypoints);
  activation_head_ = nn::make_linear(params, "encoder.activation_head", gw, segments, rng);
  offset_head_ = nn::make_linear(params, "decoder.offset_head", gw, segments * kOffsetBasisSize * 3, rng,
                                 nn::Init::kZero);
}

EncoderOutput Encoder::operator()(nn::Binder& bind, const EncoderPlan& plan, const Points<double>& points) const {
  require(plan.point_count == points.rows(), ErrorKind::kArgument, "encoder plan was built for another cloud");
  require(points.rows() >= config_.keypoints, ErrorKind::kArgument, "fewer points than keypoints");
  ad::Tape& tape = bind.tape();
  const auto c2 = static_cast<Eigen::Index>(plan.centers2.size());

  const ad::Var xyz = tape.constant(points);
  const ad::Var f1 = ad::max_pool_groups(sa1_(bind, tape.constant(plan.relative1)), config_.sa1_group);
  const ad::Var in2 = ad::concat_cols(tape.constant(plan.relative2), ad::gather_rows(f1, plan.group2));
  const ad::Var f2 = ad::max_pool_groups(sa2_(bind, in2), config_.sa2_group);
  const ad::Var global = ad::max_pool_groups(sa3_(bind, ad::concat_cols(tape.constant(plan.xyz2), f2)), c2);

  const ad::Var u3 = fp3_(bind, ad::concat_cols(ad::broadcast_rows(global, c2), f2));
  const ad::Var u2 = fp2_(bind, ad::concat_cols(ad::weighted_gather(u3, plan.up2_index, plan.up2_weight), f1));
  const ad::Var u1 = fp1_(bind, ad::concat_cols(ad::weighted_gather(u2, plan.up1_index, plan.up1_weight), xyz));

  EncoderOutput out;
  out.point_scores = ad::softmax_columns(head_(bind, u1));
  out.keypoints = ad::matmul(ad::transpose(out.point_scores), xyz);
  out.activations = ad::sigmoid(activation_head_(bind, global));
  out.offset_coefficients =
      ad::reshape(offset_head_(bind, global), segment_count(config_.keypoints) * kOffsetBasisSize, 3);
  out.descriptor = global;
  return out;
}

}  // namespace mrkp
