#include "mrkp/trainer.hpp"

#include "mrkp/io.hpp"

#include <cstdio>
#include <cstring>

namespace mrkp {
namespace {

// Keeps the pair stream independent of the parameter initialization stream.
constexpr std::uint64_t kSamplerSalt = 0x9e3779b97f4a7c15ULL;

Points<double> as_points(const ad::Matrix& m) { return m; }

std::string worst_parameter(const nn::ParameterSet& params, const std::vector<nn::Matrix>& grads) {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].allFinite()) return params[i].name;
  }
  return {};
}

}  // namespace

std::string step_log_header() { return "step,fidelity,coverage,self,mutual,reg1,reg2,total"; }

std::string format_step(const StepRecord& r) {
  const auto& l = r.losses;
  std::string out = std::to_string(r.step);
  for (double v : {l.fidelity, l.coverage, l.self_loss, l.mutual_loss, l.reg_skeleton_offsets,
                   l.reg_keypoint_offsets, l.total}) {
    out += ',' + format_double(v);
  }
  return out;
}

std::vector<PointCloud> prepare_dataset(const std::vector<PointCloud>& raw, Eigen::Index points,
                                        std::uint64_t seed) {
  std::vector<PointCloud> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    require(raw[i].size() >= points, ErrorKind::kArgument,
            "cloud '" + raw[i].id + "' has " + std::to_string(raw[i].size()) + " points, fewer than points_per_cloud = " +
                std::to_string(points));
    out.push_back(farthest_point_sample(normalize_unit_box(raw[i]), points, seed + i));
  }
  return out;
}

std::string dataset_fingerprint(const std::vector<PointCloud>& clouds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& c : clouds) {
    mix(c.id.data(), c.id.size());
    mix(c.category.data(), c.category.size());
    for (Eigen::Index r = 0; r < c.points.rows(); ++r) {
      for (Eigen::Index k = 0; k < 3; ++k) {
        const double v = c.points(r, k);
        mix(&v, sizeof v);
      }
    }
    if (c.part_labels) mix(c.part_labels->data(), c.part_labels->size() * sizeof(int));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Trainer::Trainer(TrainConfig config, std::vector<PointCloud> dataset)
    : config_(std::move(config)), dataset_(std::move(dataset)) {
  validate(config_);
  require(!dataset_.empty(), ErrorKind::kArgument, "training dataset is empty");
  require(dataset_.size() >= 2, ErrorKind::kArgument, "training needs at least two clouds to form pairs");
  for (const auto& c : dataset_) {
    validate(c);
    require(c.category == dataset_.front().category, ErrorKind::kArgument,
            "dataset mixes categories '" + dataset_.front().category + "' and '" + c.category + "'");
    require(c.size() == config_.points_per_cloud, ErrorKind::kArgument,
            "cloud '" + c.id + "' has " + std::to_string(c.size()) + " points; prepare the dataset to points_per_cloud = " +
                std::to_string(config_.points_per_cloud));
  }
  fingerprint_ = dataset_fingerprint(dataset_);
  model_ = std::make_unique<Model>(config_.model_config());
  adam_ = Adam({config_.learning_rate, config_.beta1, config_.beta2, config_.epsilon}, model_->parameters());
  sampler_ = PairSampler(dataset_.size(), config_.seed ^ kSamplerSalt);
  plans_.resize(dataset_.size());
}

Trainer Trainer::resume(const Checkpoint& ck, std::vector<PointCloud> dataset, const TrainConfig* requested) {
  TrainConfig config = ck.config;
  if (requested) {
    std::string why;
    require(structurally_compatible(ck.config, *requested, &why), ErrorKind::kIncompatible,
            "checkpoint does not match the requested config: " + why);
    config = *requested;
  }
  Trainer t(std::move(config), std::move(dataset));
  require(t.fingerprint_ == ck.dataset_fingerprint && t.dataset_.size() == ck.dataset_size, ErrorKind::kIncompatible,
          "checkpoint was trained on a different dataset (fingerprint " + ck.dataset_fingerprint + ", got " +
              t.fingerprint_ + ")");
  *t.model_ = load_model(ck);
  t.adam_ = Adam({t.config_.learning_rate, t.config_.beta1, t.config_.beta2, t.config_.epsilon},
                 t.model_->parameters());
  t.adam_.restore(ck.optimizer_steps, ck.first_moments, ck.second_moments);
  try {
    t.sampler_ = PairSampler::deserialize(ck.sampler_state);
  } catch (const Error& e) {
    throw Error(ErrorKind::kIncompatible, std::string("checkpoint pair stream is unreadable: ") + e.what());
  }
  t.steps_done_ = ck.step;
  return t;
}

const EncoderPlan& Trainer::plan(std::size_t index) {
  if (!plans_[index]) plans_[index] = plan_encoder(dataset_[index].points, model_->config().encoder);
  return *plans_[index];
}

std::uint64_t Trainer::total_steps() const {
  return static_cast<std::uint64_t>(config_.epochs) * config_.resolved_pairs_per_epoch(dataset_.size());
}

StepRecord Trainer::step() {
  const IndexPair pair = sampler_.next();
  const PointCloud& p1 = dataset_[pair.first];
  const PointCloud& p2 = dataset_[pair.second];
  const EncoderPlan& plan1 = plan(pair.first);
  const EncoderPlan& plan2 = plan(pair.second);

  nn::ParameterSet& params = model_->parameters();
  ad::Tape tape;
  nn::Binder bind(tape, params, true);
  const EncoderOutput e1 = model_->encoder()(bind, plan1, p1.points);
  const EncoderOutput e2 = model_->encoder()(bind, plan2, p2.points);

  const ad::Var o_k = model_->offset_network()(bind, e1.keypoints, e2.keypoints);
  const auto [kp1p, kp2p] = reshape_keypoints(e1.keypoints, e2.keypoints, o_k, config_.mutual_direction);

  const SkeletonOptions& sk = config_.skeleton;
  const DecodedSkeleton rec1 = decode(e1.keypoints, e1.activations, e1.offset_coefficients, sk);
  const DecodedSkeleton rec2 = decode(e2.keypoints, e2.activations, e2.offset_coefficients, sk);

  const bool forward = config_.mutual_direction == MutualDirection::kForward;
  // forward: KP1' comes from cloud 2 and is scored against cloud 1; mirrored is the reverse
  const bool by_source = config_.mutual_heads == MutualHeads::kSource;
  const EncoderOutput& src1 = forward == by_source ? e2 : e1;
  const EncoderOutput& src2 = forward == by_source ? e1 : e2;
  const DecodedSkeleton rec1p = decode(kp1p, src1.activations, src1.offset_coefficients, sk);
  const DecodedSkeleton rec2p = decode(kp2p, src2.activations, src2.offset_coefficients, sk);

  const PointCloud& t1p = forward ? p1 : p2;
  const PointCloud& t2p = forward ? p2 : p1;
  Points<double> target1p, target2p;
  if (config_.mutual_target == MutualTarget::kInput) {
    target1p = t1p.points;
    target2p = t2p.points;
  } else {
    target1p = as_points((forward ? rec1 : rec2).points.value());
    target2p = as_points((forward ? rec2 : rec1).points.value());
  }

  const ad::Var c1 = ccd_terms(rec1.points, rec1.activations, rec1.layout, p1.points);
  const ad::Var c2 = ccd_terms(rec2.points, rec2.activations, rec2.layout, p2.points);
  const ad::Var c1p = ccd_terms(rec1p.points, rec1p.activations, rec1p.layout, target1p);
  const ad::Var c2p = ccd_terms(rec2p.points, rec2p.activations, rec2p.layout, target2p);

  const ad::Var skel_sq = ad::linear_combination(
      {ad::sum_squares(rec1.displacements), ad::sum_squares(rec2.displacements), ad::sum_squares(rec1p.displacements),
       ad::sum_squares(rec2p.displacements)},
      {1.0, 1.0, 1.0, 1.0});
  const ad::Var kp_sq = ad::sum_squares(o_k);

  const LossWeights& w = config_.weights;
  std::vector<ad::Var> self_terms, mutual_terms;
  for (const auto* c : {&c1, &c2}) {
    self_terms.push_back(ad::element(*c, 0, 0));
    self_terms.push_back(ad::element(*c, 0, 1));
  }
  for (const auto* c : {&c1p, &c2p}) {
    mutual_terms.push_back(ad::element(*c, 0, 0));
    mutual_terms.push_back(ad::element(*c, 0, 1));
  }
  std::vector<ad::Var> terms = self_terms;
  terms.insert(terms.end(), mutual_terms.begin(), mutual_terms.end());
  terms.push_back(skel_sq);
  terms.push_back(kp_sq);
  std::vector<double> coeffs(4, w.lambda_self);
  coeffs.insert(coeffs.end(), 4, w.lambda_mutual);
  coeffs.push_back(w.mu_skeleton_offsets);
  coeffs.push_back(w.mu_keypoint_offsets);
  const ad::Var total = ad::linear_combination(terms, coeffs);

  double fidelity = 0, coverage = 0;
  for (const auto* c : {&c1, &c2, &c1p, &c2p}) {
    fidelity += c->value()(0, 0);
    coverage += c->value()(0, 1);
  }
  const double self = c1.value().sum() + c2.value().sum();
  const double mutual = c1p.value().sum() + c2p.value().sum();

  StepRecord record;
  record.step = steps_done_ + 1;
  record.pair = pair;
  record.losses = total_loss(fidelity, coverage, self, mutual, skel_sq.scalar(), kp_sq.scalar(), w);
  const std::string bad = first_non_finite(record.losses);
  require(bad.empty(), ErrorKind::kNumeric,
          "loss component '" + bad + "' is not finite at step " + std::to_string(record.step) + " (pair " +
              p1.id + ", " + p2.id + ")");

  if (config_.log_mutual_gradient) {
    const ad::Var mutual_term = ad::linear_combination(mutual_terms, std::vector<double>(4, w.lambda_mutual));
    tape.backward(mutual_term);
    record.mutual_grad_norm = global_norm(bind.gradients());
  }
  tape.backward(total);
  std::vector<nn::Matrix> grads = bind.gradients();
  const std::string bad_grad = worst_parameter(params, grads);
  require(bad_grad.empty(), ErrorKind::kNumeric,
          "gradient of '" + bad_grad + "' is not finite at step " + std::to_string(record.step));
  record.grad_norm = clip_global_norm(grads, config_.clip_norm);
  adam_.step(params, grads);
  require(params.all_finite(), ErrorKind::kNumeric,
          "parameters became non-finite after step " + std::to_string(record.step));
  ++steps_done_;
  return record;
}

std::vector<StepRecord> Trainer::run(std::uint64_t steps, const std::function<void(const StepRecord&)>& on_step) {
  std::vector<StepRecord> log;
  for (std::uint64_t i = 0; i < steps && steps_done_ < total_steps(); ++i) {
    log.push_back(step());
    if (on_step) on_step(log.back());
  }
  return log;
}

std::vector<StepRecord> Trainer::run_to_end(const std::function<void(const StepRecord&)>& on_step) {
  return run(total_steps() - std::min(total_steps(), steps_done_), on_step);
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  ck.config = config_;
  for (const auto& p : model_->parameters()) ck.parameters.push_back(p);
  ck.optimizer_steps = adam_.steps();
  ck.first_moments = adam_.first_moments();
  ck.second_moments = adam_.second_moments();
  ck.step = steps_done_;
  ck.sampler_state = sampler_.serialize();
  ck.dataset_size = dataset_.size();
  ck.dataset_fingerprint = fingerprint_;
  return ck;
}

TrainResult train(const TrainConfig& config, const std::vector<PointCloud>& dataset,
                  const std::function<void(const StepRecord&)>& on_step) {
  Trainer t(config, dataset);
  TrainResult out;
  out.log = t.run_to_end(on_step);
  out.checkpoint = t.checkpoint();
  return out;
}

TrainResult resume(const Checkpoint& checkpoint, const std::vector<PointCloud>& dataset,
                   const std::function<void(const StepRecord&)>& on_step) {
  Trainer t = Trainer::resume(checkpoint, dataset);
  TrainResult out;
  out.log = t.run_to_end(on_step);
  out.checkpoint = t.checkpoint();
  return out;
}

KeypointSet detect(const Checkpoint& checkpoint, const PointCloud& cloud) {
  return load_model(checkpoint).detect(cloud);
}

}  // namespace mrkp
