#pragma once

#include "mrkp/nn.hpp"

#include <cstdint>
#include <vector>

namespace mrkp {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a ParameterSet.
class Adam {
 public:
  Adam() = default;
  Adam(const AdamOptions& options, const nn::ParameterSet& params);

  void step(nn::ParameterSet& params, const std::vector<nn::Matrix>& grads);

  std::int64_t steps() const { return steps_; }
  const std::vector<nn::Matrix>& first_moments() const { return m_; }
  const std::vector<nn::Matrix>& second_moments() const { return v_; }
  const AdamOptions& options() const { return options_; }

  void restore(std::int64_t steps, std::vector<nn::Matrix> first, std::vector<nn::Matrix> second);

 private:
  AdamOptions options_;
  std::int64_t steps_ = 0;
  std::vector<nn::Matrix> m_, v_;
};

/// Global L2 norm across all gradient tensors.
double global_norm(const std::vector<nn::Matrix>& grads);

/// Rescales `grads` so the global norm is at most `max_norm`; returns the norm
/// before clipping.
double clip_global_norm(std::vector<nn::Matrix>& grads, double max_norm);

}  // namespace mrkp
