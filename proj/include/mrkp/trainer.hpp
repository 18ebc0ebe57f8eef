#pragma once

#include "mrkp/adam.hpp"
#include "mrkp/checkpoint.hpp"
#include "mrkp/config.hpp"
#include "mrkp/losses.hpp"
#include "mrkp/model.hpp"
#include "mrkp/pairs.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mrkp {

struct StepRecord {
  std::uint64_t step = 0;  // 1-based
  IndexPair pair;
  LossBreakdown losses;
  double grad_norm = 0;  // before clipping
  std::optional<double> mutual_grad_norm;
};

/// `step,fidelity,coverage,self,mutual,reg1,reg2,total`
std::string step_log_header();
std::string format_step(const StepRecord& record);

/// Normalizes every cloud to the unit box and downsamples it to `points` with
/// seeded farthest point sampling. Clouds smaller than `points` are rejected.
std::vector<PointCloud> prepare_dataset(const std::vector<PointCloud>& raw, Eigen::Index points,
                                        std::uint64_t seed);

/// FNV-1a over ids, coordinates and labels, as 16 hex digits.
std::string dataset_fingerprint(const std::vector<PointCloud>& clouds);

/// Siamese loop: one pair per step, epochs × pairs_per_epoch steps in total.
class Trainer {
 public:
  /// The dataset must be prepared (normalized, points_per_cloud each) and hold
  /// a single category.
  Trainer(TrainConfig config, std::vector<PointCloud> dataset);

  /// Restores parameters, optimizer moments and the pair stream. A `requested`
  /// config must be structurally compatible with the snapshot; its
  /// non-structural fields (epochs, weights, rate...) take effect.
  static Trainer resume(const Checkpoint& checkpoint, std::vector<PointCloud> dataset,
                        const TrainConfig* requested = nullptr);

  StepRecord step();

  /// Runs up to `steps` more steps, stopping at total_steps().
  std::vector<StepRecord> run(std::uint64_t steps, const std::function<void(const StepRecord&)>& on_step = {});
  std::vector<StepRecord> run_to_end(const std::function<void(const StepRecord&)>& on_step = {});

  std::uint64_t steps_done() const { return steps_done_; }
  std::uint64_t total_steps() const;

  Checkpoint checkpoint() const;

  const Model& model() const { return *model_; }
  const TrainConfig& config() const { return config_; }
  const std::vector<PointCloud>& dataset() const { return dataset_; }

 private:
  const EncoderPlan& plan(std::size_t index);

  TrainConfig config_;
  std::vector<PointCloud> dataset_;
  std::string fingerprint_;
  std::unique_ptr<Model> model_;
  Adam adam_;
  PairSampler sampler_;
  std::uint64_t steps_done_ = 0;
  std::vector<std::optional<EncoderPlan>> plans_;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> log;
};

TrainResult train(const TrainConfig& config, const std::vector<PointCloud>& dataset,
                  const std::function<void(const StepRecord&)>& on_step = {});

/// Continues to the snapshot's total step count.
TrainResult resume(const Checkpoint& checkpoint, const std::vector<PointCloud>& dataset,
                   const std::function<void(const StepRecord&)>& on_step = {});

/// Inference only: encode and predict, no reshaping.
KeypointSet detect(const Checkpoint& checkpoint, const PointCloud& cloud);

}  // namespace mrkp
