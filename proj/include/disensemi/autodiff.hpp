/*
Copyright 2026 The DisenSemi Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. A Tape records one forward evaluation; backward() walks it in
// reverse and accumulates gradients into the Parameters that were bound.

#include <Eigen/Dense>

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace disensemi::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// A learnable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const { return value()(0, 0); }
  bool requires_grad() const;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Binds a parameter; backward() adds the node gradient into p.grad.
  Var param(Parameter& p);

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 node and propagates.
  void backward(Var loss);

  const Matrix& value(int id) const { return nodes_[id].value; }
  /// Gradient of a node after backward(); zero matrix if none reached it.
  Matrix grad(Var v) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  using Backprop = std::function<void(Tape&, const Matrix& upstream)>;

  /// Records an op result. `backprop` receives the node's upstream gradient
  /// and must route it to parents via accumulate().
  Var record(Matrix value, std::initializer_list<Var> parents, Backprop backprop);
  Var record(Matrix value, const std::vector<Var>& parents, Backprop backprop);

  template <typename Expr>
  void accumulate(Var v, const Expr& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Direct mutable access to a node gradient, for sparse accumulation.
  Matrix& grad_buffer(Var v);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backprop backprop;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape->value(id); }
inline bool Var::requires_grad() const { return tape->requires_grad(id); }

using IndexVector = std::vector<Index>;

// ---- elementwise and linear algebra ----

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// Adds a 1 x cols row to every row of a.
Var add_row(Var a, Var row);
/// Multiplies row i of a by c(i, 0); c is rows x 1.
Var scale_rows(Var a, Var c);

Var relu(Var a);
Var sigmoid(Var a);
/// log(1 + exp(a)), computed stably.
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);
Var abs(Var a);
/// max(a, lo); gradient is zero where clamped.
Var clamp_min(Var a, double lo);

// ---- reductions ----

Var sum(Var a);
Var mean(Var a);
/// sum(a .* w) for a constant weight matrix of the same shape.
Var weighted_sum(Var a, const Matrix& w);
/// Row sums, rows x 1.
Var row_sum(Var a);

// ---- structural ----

Var cols(Var a, Index start, Index count);
Var hconcat(const std::vector<Var>& parts);
Var gather_rows(Var a, const IndexVector& idx);
/// out(idx[i]) += a(i); out has `out_rows` rows.
Var scatter_add_rows(Var a, const IndexVector& idx, Index out_rows);
/// Mean of rows per segment; segments with no rows yield zero rows.
Var segment_mean(Var a, const IndexVector& segment, Index segments);
/// a(i, idx[i]) as a rows x 1 column.
Var pick(Var a, const IndexVector& idx);
Var transpose(Var a);
/// Diagonal of a square matrix as a column.
Var diagonal(Var a);

// ---- row/block operations; a row of width K*m is read as K blocks of m ----

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
/// log sum_j exp(a(i, j)); with exclude_diagonal the (i, i) entry is skipped.
Var logsumexp_rows(Var a, bool exclude_diagonal = false);
/// L2-normalizes every block of every row. Zero blocks stay zero.
Var block_normalize(Var a, Index blocks);
/// out(i, k) = <a_i block k, b_i block k>. b may have one row (broadcast).
Var block_dot(Var a, Var b, Index blocks);
/// out(i, k*K + l) = <a_i block k, a_i block l>.
Var block_gram(Var a, Index blocks);
/// out(i) = sum_k w(i, k) * a_i block k; output width is block size.
Var block_weighted_sum(Var a, Var w);
/// Multiplies block k of row i by c(i, k).
Var scale_blocks(Var a, Var c);
/// Block k of the result is (block k of a) * mats[k].
Var block_matmul(Var a, const std::vector<Var>& mats);

}  // namespace disensemi::ad
