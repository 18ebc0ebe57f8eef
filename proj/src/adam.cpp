#include "mrkp/adam.hpp"

#include <cmath>

namespace mrkp {

Adam::Adam(const AdamOptions& options, const nn::ParameterSet& params) : options_(options) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.push_back(nn::Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(nn::Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void Adam::step(nn::ParameterSet& params, const std::vector<nn::Matrix>& grads) {
  require(grads.size() == params.size() && m_.size() == params.size(), ErrorKind::kArgument,
          "gradient list does not match the parameter set");
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = params[i].value;
    const auto& g = grads[i];
    require(g.rows() == value.rows() && g.cols() == value.cols(), ErrorKind::kArgument,
            "gradient shape mismatch for '" + params[i].name + "'");
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseAbs2();
    value.array() -= options_.learning_rate * (m_[i].array() / correction1) /
                     ((v_[i].array() / correction2).sqrt() + options_.epsilon);
  }
}

void Adam::restore(std::int64_t steps, std::vector<nn::Matrix> first, std::vector<nn::Matrix> second) {
  require(first.size() == m_.size() && second.size() == v_.size(), ErrorKind::kIncompatible,
          "optimizer state does not match the parameter set");
  for (std::size_t i = 0; i < m_.size(); ++i) {
    require(first[i].rows() == m_[i].rows() && first[i].cols() == m_[i].cols() && second[i].rows() == v_[i].rows() &&
                second[i].cols() == v_[i].cols(),
            ErrorKind::kIncompatible, "optimizer moment shape mismatch");
  }
  steps_ = steps;
  m_ = std::move(first);
  v_ = std::move(second);
}

double global_norm(const std::vector<nn::Matrix>& grads) {
  double sq = 0;
  for (const auto& g : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

double clip_global_norm(std::vector<nn::Matrix>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& g : grads) g *= factor;
  }
  return norm;
}

}  // namespace mrkp
