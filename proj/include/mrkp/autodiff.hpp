#pragma once

#include "mrkp/types.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

// Minimal reverse-mode differentiation over dense double matrices. A Tape records
// every intermediate in creation order; backward() walks it in reverse. Nodes
// whose inputs are all constants carry no backward closure, so inference on a
// tape of constants costs nothing extra.
namespace mrkp::ad {

using Matrix = Eigen::MatrixXd;
using IndexMatrix = Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  bool requires_grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);

  /// Records an op result. `backward` is dropped when no parent needs gradients.
  Var record(Matrix value, std::initializer_list<Var> parents, Backward backward);

  /// Clears all gradients, seeds `root` (1×1) with 1 and propagates.
  void backward(const Var& root);

  template <typename Derived>
  void accumulate(const Var& target, const Eigen::MatrixBase<Derived>& g) {
    Node& node = nodes_[target.id()];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
      node.grad = g;
    } else {
      node.grad += g;
    }
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::deque<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline const Matrix& Var::grad() const { return tape_->grad(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var transpose(const Var& a);
/// x (R×C) plus a 1×C row added to every row.
Var add_row(const Var& x, const Var& row);
Var relu(const Var& x);
Var sigmoid(const Var& x);
/// Exponential normalization down each column.
Var softmax_columns(const Var& x);
Var gather_rows(const Var& x, const std::vector<Eigen::Index>& rows);
/// Rows come in consecutive groups of `group` rows; returns the per-column max of each group.
Var max_pool_groups(const Var& x, Eigen::Index group);
Var concat_cols(const Var& a, const Var& b);
/// Repeats a 1×C row R times.
Var broadcast_rows(const Var& row, Eigen::Index rows);
/// out.row(r) = Σ_j weights(r, j) · x.row(index(r, j)).
Var weighted_gather(const Var& x, const IndexMatrix& index, const Matrix& weights);
/// Reinterprets the entries in row-major order with a new shape.
Var reshape(const Var& x, Eigen::Index rows, Eigen::Index cols);
/// Σ x² as a 1×1.
Var sum_squares(const Var& x);
/// Σ_k coeffs[k] · terms[k] over 1×1 terms.
Var linear_combination(const std::vector<Var>& terms, const std::vector<double>& coeffs);
/// Picks entry (r, c) as a 1×1.
Var element(const Var& x, Eigen::Index r, Eigen::Index c);

}  // namespace mrkp::ad
