#include "mrkp/autodiff.hpp"

#include <cmath>
#include <string>

namespace mrkp::ad {
namespace {

void require_same_tape(const Var& a, const Var& b) {
  require(a.valid() && b.valid() && &a.tape() == &b.tape(), ErrorKind::kArgument, "vars live on different tapes");
}

void require_shape(bool ok, const char* op) {
  require(ok, ErrorKind::kArgument, std::string("shape mismatch in ") + op);
}

}  // namespace

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  nodes_.push_back(Node{std::move(value), Matrix(), needs, needs ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(const Var& root) {
  require(&root.tape() == this, ErrorKind::kArgument, "root belongs to another tape");
  require(root.rows() == 1 && root.cols() == 1, ErrorKind::kArgument, "backward root must be a 1x1 value");
  for (auto& node : nodes_) node.grad.resize(0, 0);
  if (!nodes_[root.id()].requires_grad) return;
  nodes_[root.id()].grad = Matrix::Ones(1, 1);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.backward && node.grad.size() != 0) node.backward(*this, node.grad);
  }
}

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_shape(a.cols() == b.rows(), "matmul");
  return a.tape().record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  return a.tape().record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  return a.tape().record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var scale(const Var& a, double factor) {
  return a.tape().record(a.value() * factor, {a}, [a, factor](Tape& t, const Matrix& g) {
    t.accumulate(a, g * factor);
  });
}

Var transpose(const Var& a) {
  return a.tape().record(a.value().transpose(), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.transpose());
  });
}

Var add_row(const Var& x, const Var& row) {
  require_same_tape(x, row);
  require_shape(row.rows() == 1 && row.cols() == x.cols(), "add_row");
  Matrix out = x.value();
  out.rowwise() += row.value().row(0);
  return x.tape().record(std::move(out), {x, row}, [x, row](Tape& t, const Matrix& g) {
    t.accumulate(x, g);
    if (row.requires_grad()) t.accumulate(row, g.colwise().sum());
  });
}

Var relu(const Var& x) {
  Matrix out = x.value().cwiseMax(0.0);
  return x.tape().record(std::move(out), {x}, [x](Tape& t, const Matrix& g) {
    t.accumulate(x, (x.value().array() > 0.0).cast<double>().matrix().cwiseProduct(g));
  });
}

Var sigmoid(const Var& x) {
  Matrix out = (1.0 / (1.0 + (-x.value().array()).exp())).matrix();
  Tape& tape = x.tape();
  const std::size_t self = tape.size();
  return tape.record(std::move(out), {x}, [x, self](Tape& t, const Matrix& g) {
    const auto& y = t.value(self).array();
    t.accumulate(x, (g.array() * y * (1.0 - y)).matrix());
  });
}

Var softmax_columns(const Var& x) {
  Matrix out = x.value();
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    auto col = out.col(c);
    col.array() -= col.maxCoeff();
    col = col.array().exp().matrix();
    col /= col.sum();
  }
  Tape& tape = x.tape();
  const std::size_t self = tape.size();
  return tape.record(std::move(out), {x}, [x, self](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(self);
    Matrix dx = y.cwiseProduct(g);
    const Eigen::RowVectorXd dots = dx.colwise().sum();
    dx -= y * dots.asDiagonal();
    t.accumulate(x, dx);
  });
}

Var gather_rows(const Var& x, const std::vector<Eigen::Index>& rows) {
  const Matrix& v = x.value();
  Matrix out(static_cast<Eigen::Index>(rows.size()), v.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require_shape(rows[r] >= 0 && rows[r] < v.rows(), "gather_rows");
    out.row(static_cast<Eigen::Index>(r)) = v.row(rows[r]);
  }
  return x.tape().record(std::move(out), {x}, [x, rows](Tape& t, const Matrix& g) {
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) dx.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
    t.accumulate(x, dx);
  });
}

Var max_pool_groups(const Var& x, Eigen::Index group) {
  const Matrix& v = x.value();
  require_shape(group > 0 && v.rows() % group == 0, "max_pool_groups");
  const Eigen::Index groups = v.rows() / group;
  Matrix out(groups, v.cols());
  IndexMatrix argmax(groups, v.cols());
  for (Eigen::Index gi = 0; gi < groups; ++gi) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      Eigen::Index best = gi * group;
      for (Eigen::Index r = best + 1; r < (gi + 1) * group; ++r) {
        if (v(r, c) > v(best, c)) best = r;
      }
      out(gi, c) = v(best, c);
      argmax(gi, c) = best;
    }
  }
  return x.tape().record(std::move(out), {x}, [x, argmax](Tape& t, const Matrix& g) {
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index gi = 0; gi < argmax.rows(); ++gi) {
      for (Eigen::Index c = 0; c < argmax.cols(); ++c) dx(argmax(gi, c), c) += g(gi, c);
    }
    t.accumulate(x, dx);
  });
}

Var concat_cols(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_shape(a.rows() == b.rows(), "concat_cols");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g.leftCols(a.cols()));
    if (b.requires_grad()) t.accumulate(b, g.rightCols(b.cols()));
  });
}

Var broadcast_rows(const Var& row, Eigen::Index rows) {
  require_shape(row.rows() == 1, "broadcast_rows");
  return row.tape().record(row.value().replicate(rows, 1), {row}, [row](Tape& t, const Matrix& g) {
    t.accumulate(row, g.colwise().sum());
  });
}

Var weighted_gather(const Var& x, const IndexMatrix& index, const Matrix& weights) {
  require_shape(index.rows() == weights.rows() && index.cols() == weights.cols(), "weighted_gather");
  const Matrix& v = x.value();
  Matrix out = Matrix::Zero(index.rows(), v.cols());
  for (Eigen::Index r = 0; r < index.rows(); ++r) {
    for (Eigen::Index j = 0; j < index.cols(); ++j) {
      require_shape(index(r, j) >= 0 && index(r, j) < v.rows(), "weighted_gather");
      out.row(r) += weights(r, j) * v.row(index(r, j));
    }
  }
  return x.tape().record(std::move(out), {x}, [x, index, weights](Tape& t, const Matrix& g) {
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < index.rows(); ++r) {
      for (Eigen::Index j = 0; j < index.cols(); ++j) dx.row(index(r, j)) += weights(r, j) * g.row(r);
    }
    t.accumulate(x, dx);
  });
}

Var reshape(const Var& x, Eigen::Index rows, Eigen::Index cols) {
  require_shape(rows * cols == x.value().size(), "reshape");
  const Eigen::Index in_cols = x.cols();
  Matrix out(rows, cols);
  const Matrix& v = x.value();
  for (Eigen::Index k = 0; k < v.size(); ++k) out(k / cols, k % cols) = v(k / in_cols, k % in_cols);
  return x.tape().record(std::move(out), {x}, [x](Tape& t, const Matrix& g) {
    Matrix dx(x.rows(), x.cols());
    const Eigen::Index cols_in = x.cols(), cols_out = g.cols();
    for (Eigen::Index k = 0; k < g.size(); ++k) dx(k / cols_in, k % cols_in) = g(k / cols_out, k % cols_out);
    t.accumulate(x, dx);
  });
}

Var sum_squares(const Var& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().squaredNorm();
  return x.tape().record(std::move(out), {x}, [x](Tape& t, const Matrix& g) {
    t.accumulate(x, (2.0 * g(0, 0)) * x.value());
  });
}

Var linear_combination(const std::vector<Var>& terms, const std::vector<double>& coeffs) {
  require(!terms.empty() && terms.size() == coeffs.size(), ErrorKind::kArgument,
          "linear_combination needs matching, nonempty terms and coefficients");
  Matrix out = Matrix::Zero(1, 1);
  bool needs = false;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    require_same_tape(terms[k], terms.front());
    require_shape(terms[k].rows() == 1 && terms[k].cols() == 1, "linear_combination");
    out(0, 0) += coeffs[k] * terms[k].scalar();
    needs = needs || terms[k].requires_grad();
  }
  Tape& tape = terms.front().tape();
  // record() takes an initializer list; route the dependency through the closure instead.
  auto backward = [terms, coeffs](Tape& t, const Matrix& g) {
    for (std::size_t k = 0; k < terms.size(); ++k) t.accumulate(terms[k], g * coeffs[k]);
  };
  if (!needs) return tape.constant(std::move(out));
  Var any_grad;
  for (const auto& term : terms) {
    if (term.requires_grad()) {
      any_grad = term;
      break;
    }
  }
  return tape.record(std::move(out), {any_grad}, std::move(backward));
}

Var element(const Var& x, Eigen::Index r, Eigen::Index c) {
  require_shape(r >= 0 && r < x.rows() && c >= 0 && c < x.cols(), "element");
  Matrix out(1, 1);
  out(0, 0) = x.value()(r, c);
  return x.tape().record(std::move(out), {x}, [x, r, c](Tape& t, const Matrix& g) {
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    dx(r, c) = g(0, 0);
    t.accumulate(x, dx);
  });
}

}  // namespace mrkp::ad
