#include "mrkp/nn.hpp"

#include <cmath>

namespace mrkp::nn {

std::size_t ParameterSet::add(std::string name, Matrix value) {
  require(!contains(name), ErrorKind::kArgument, "duplicate parameter '" + name + "'");
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{std::move(name), std::move(value)});
  return params_.size() - 1;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), ErrorKind::kArgument, "unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

bool ParameterSet::all_finite() const {
  for (const auto& p : params_) {
    if (!p.value.allFinite()) return false;
  }
  return true;
}

Binder::Binder(ad::Tape& tape, const ParameterSet& params, bool trainable)
    : tape_(tape), params_(params), trainable_(trainable), bound_(params.size()) {}

ad::Var Binder::operator()(std::size_t index) {
  auto& slot = bound_.at(index);
  if (!slot.valid()) {
    slot = trainable_ ? tape_.variable(params_[index].value) : tape_.constant(params_[index].value);
  }
  return slot;
}

std::vector<Matrix> Binder::gradients() const {
  std::vector<Matrix> grads;
  grads.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& v = bound_[i];
    if (v.valid() && v.grad().size() != 0) {
      grads.push_back(v.grad());
    } else {
      grads.push_back(Matrix::Zero(params_[i].value.rows(), params_[i].value.cols()));
    }
  }
  return grads;
}

ad::Var Linear::operator()(Binder& bind, const ad::Var& x) const {
  return ad::add_row(ad::matmul(x, bind(weight)), bind(bias));
}

Linear make_linear(ParameterSet& params, const std::string& name, Eigen::Index in, Eigen::Index out,
                   std::mt19937_64& rng, Init init) {
  Matrix w = Matrix::Zero(in, out);
  if (init == Init::kHe) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    for (Eigen::Index r = 0; r < in; ++r) {
      for (Eigen::Index c = 0; c < out; ++c) w(r, c) = normal(rng);
    }
  }
  Linear layer;
  layer.weight = params.add(name + ".weight", std::move(w));
  layer.bias = params.add(name + ".bias", Matrix::Zero(1, out));
  return layer;
}

ad::Var Mlp::operator()(Binder& bind, ad::Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](bind, x);
    if (activate_last || i + 1 < layers.size()) x = ad::relu(x);
  }
  return x;
}

Mlp make_mlp(ParameterSet& params, const std::string& name, Eigen::Index in, const std::vector<Eigen::Index>& widths,
             std::mt19937_64& rng, bool activate_last, Init last_init) {
  Mlp mlp;
  mlp.activate_last = activate_last;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const Init init = i + 1 == widths.size() ? last_init : Init::kHe;
    mlp.layers.push_back(make_linear(params, name + "." + std::to_string(i), in, widths[i], rng, init));
    in = widths[i];
  }
  return mlp;
}

}  // namespace mrkp::nn
