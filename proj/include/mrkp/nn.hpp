#pragma once

#include "mrkp/autodiff.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace mrkp::nn {

using ad::Matrix;

struct Parameter {
  std::string name;
  Matrix value;
};

/// Ordered, named parameter tensors. Names are dotted namespaces such as
/// `encoder.sa1.0.weight`; the insertion order is the optimizer order.
class ParameterSet {
 public:
  std::size_t add(std::string name, Matrix value);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t scalar_count() const;
  bool all_finite() const;

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

/// Places parameters on a tape, once each. Trainable binding creates gradient
/// leaves; otherwise they enter as constants.
class Binder {
 public:
  Binder(ad::Tape& tape, const ParameterSet& params, bool trainable);

  ad::Var operator()(std::size_t index);
  ad::Tape& tape() { return tape_; }
  bool trainable() const { return trainable_; }

  /// Gradients aligned with the parameter set, after tape.backward(). Unbound
  /// or unreached parameters get zeros.
  std::vector<Matrix> gradients() const;

 private:
  ad::Tape& tape_;
  const ParameterSet& params_;
  bool trainable_;
  std::vector<ad::Var> bound_;
};

enum class Init { kHe, kZero };

/// y = x W + b with W stored in×out.
struct Linear {
  std::size_t weight = 0;
  std::size_t bias = 0;

  ad::Var operator()(Binder& bind, const ad::Var& x) const;
};

Linear make_linear(ParameterSet& params, const std::string& name, Eigen::Index in, Eigen::Index out,
                   std::mt19937_64& rng, Init init = Init::kHe);

/// Stack of Linear layers with ReLU between them (and after the last one when
/// `activate_last`).
struct Mlp {
  std::vector<Linear> layers;
  bool activate_last = true;

  ad::Var operator()(Binder& bind, ad::Var x) const;
};

Mlp make_mlp(ParameterSet& params, const std::string& name, Eigen::Index in, const std::vector<Eigen::Index>& widths,
             std::mt19937_64& rng, bool activate_last = true, Init last_init = Init::kHe);

}  // namespace mrkp::nn
