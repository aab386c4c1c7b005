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

#include "disensemi/autodiff.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace disensemi::ad {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

double stable_softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backprop backprop) {
  return record(std::move(value), std::vector<Var>(parents), std::move(backprop));
}

Var Tape::record(Matrix value, const std::vector<Var>& parents, Backprop backprop) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape != this) throw std::logic_error("autodiff: mixing tapes");
    n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
  }
  if (n.requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  require(loss.rows() == 1 && loss.cols() == 1, "backward: loss must be 1x1");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[loss.id].requires_grad) return;
  nodes_[loss.id].grad = Matrix::Constant(1, 1, 1.0);
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    if (n.backprop) n.backprop(*this, n.grad);
    if (n.param != nullptr) {
      if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) n.param->zero_grad();
      n.param->grad += n.grad;
    }
  }
}

// ---- elementwise and linear algebra ----

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  Matrix out = a.value() * b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimension mismatch");
  Matrix out = a.value() * b.value().transpose();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value());
    if (b.requires_grad()) t.accumulate(b, g.transpose() * a.value());
  });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  Matrix out = a.value() + b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  Matrix out = a.value() - b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var hadamard(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: shape mismatch");
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g.cwiseProduct(b.value()));
    if (b.requires_grad()) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(Var a, double s) {
  Matrix out = a.value() * s;
  return a.tape->record(std::move(out), {a}, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var add_scalar(Var a, double s) {
  Matrix out = a.value().array() + s;
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var add_row(Var a, Var row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: row shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape->record(std::move(out), {a, row}, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (row.requires_grad()) t.accumulate(row, g.colwise().sum());
  });
}

Var scale_rows(Var a, Var c) {
  require(c.cols() == 1 && c.rows() == a.rows(), "scale_rows: need rows x 1 scale");
  Matrix out = a.value().array().colwise() * c.value().col(0).array();
  return a.tape->record(std::move(out), {a, c}, [a, c](Tape& t, const Matrix& g) {
    if (a.requires_grad()) {
      Matrix ga = g.array().colwise() * c.value().col(0).array();
      t.accumulate(a, ga);
    }
    if (c.requires_grad()) t.accumulate(c, g.cwiseProduct(a.value()).rowwise().sum());
  });
}

Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (a.value().array() > 0.0).select(g, 0.0));
  });
}

Var sigmoid(Var a) {
  auto out = std::make_shared<Matrix>(a.value().unaryExpr(&stable_sigmoid));
  return a.tape->record(*out, {a}, [a, out](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(Matrix(out->array() * (1.0 - out->array()))));
  });
}

Var softplus(Var a) {
  Matrix out = a.value().unaryExpr(&stable_softplus);
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(a.value().unaryExpr(&stable_sigmoid)));
  });
}

Var exp(Var a) {
  Matrix out = a.value().array().exp();
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(Matrix(a.value().array().exp())));
  });
}

Var log(Var a) {
  Matrix out = a.value().array().log();
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseQuotient(a.value()));
  });
}

Var abs(Var a) {
  Matrix out = a.value().cwiseAbs();
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    Matrix sign = a.value().unaryExpr([](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
    t.accumulate(a, g.cwiseProduct(sign));
  });
}

Var clamp_min(Var a, double lo) {
  Matrix out = a.value().cwiseMax(lo);
  return a.tape->record(std::move(out), {a}, [a, lo](Tape& t, const Matrix& g) {
    t.accumulate(a, (a.value().array() >= lo).select(g, 0.0));
  });
}

// ---- reductions ----

Var sum(Var a) {
  Matrix out = Matrix::Constant(1, 1, a.value().sum());
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  require(a.value().size() > 0, "mean: empty input");
  const double n = static_cast<double>(a.value().size());
  Matrix out = Matrix::Constant(1, 1, a.value().sum() / n);
  return a.tape->record(std::move(out), {a}, [a, n](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / n));
  });
}

Var weighted_sum(Var a, const Matrix& w) {
  require(a.rows() == w.rows() && a.cols() == w.cols(), "weighted_sum: shape mismatch");
  Matrix out = Matrix::Constant(1, 1, a.value().cwiseProduct(w).sum());
  return a.tape->record(std::move(out), {a}, [a, w](Tape& t, const Matrix& g) { t.accumulate(a, w * g(0, 0)); });
}

Var row_sum(Var a) {
  Matrix out = a.value().rowwise().sum();
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    Matrix ga = g.col(0).replicate(1, a.cols());
    t.accumulate(a, ga);
  });
}

// ---- structural ----

Var cols(Var a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "cols: range out of bounds");
  Matrix out = a.value().middleCols(start, count);
  return a.tape->record(std::move(out), {a}, [a, start, count](Tape& t, const Matrix& g) {
    t.grad_buffer(a).middleCols(start, count) += g;
  });
}

Var hconcat(const std::vector<Var>& parts) {
  require(!parts.empty(), "hconcat: no parts");
  const Index rows = parts.front().rows();
  Index width = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, "hconcat: row mismatch");
    width += p.cols();
  }
  Matrix out(rows, width);
  Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  return parts.front().tape->record(std::move(out), parts, [parts](Tape& t, const Matrix& g) {
    Index off = 0;
    for (const Var& p : parts) {
      if (p.requires_grad()) t.accumulate(p, g.middleCols(off, p.cols()));
      off += p.cols();
    }
  });
}

Var gather_rows(Var a, const IndexVector& idx) {
  const Matrix& av = a.value();
  Matrix out(static_cast<Index>(idx.size()), av.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < av.rows(), "gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = av.row(idx[i]);
  }
  auto shared = std::make_shared<IndexVector>(idx);
  return a.tape->record(std::move(out), {a}, [a, shared](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad_buffer(a);
    const IndexVector& ix = *shared;
    for (std::size_t i = 0; i < ix.size(); ++i) ga.row(ix[i]) += g.row(static_cast<Index>(i));
  });
}

Var scatter_add_rows(Var a, const IndexVector& idx, Index out_rows) {
  const Matrix& av = a.value();
  require(static_cast<Index>(idx.size()) == av.rows(), "scatter_add_rows: index count mismatch");
  Matrix out = Matrix::Zero(out_rows, av.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < out_rows, "scatter_add_rows: index out of range");
    out.row(idx[i]) += av.row(static_cast<Index>(i));
  }
  auto shared = std::make_shared<IndexVector>(idx);
  return a.tape->record(std::move(out), {a}, [a, shared](Tape& t, const Matrix& g) {
    const IndexVector& ix = *shared;
    Matrix ga(static_cast<Index>(ix.size()), g.cols());
    for (std::size_t i = 0; i < ix.size(); ++i) ga.row(static_cast<Index>(i)) = g.row(ix[i]);
    t.accumulate(a, ga);
  });
}

Var segment_mean(Var a, const IndexVector& segment, Index segments) {
  const Matrix& av = a.value();
  require(static_cast<Index>(segment.size()) == av.rows(), "segment_mean: segment count mismatch");
  auto counts = std::make_shared<std::vector<double>>(static_cast<std::size_t>(segments), 0.0);
  Matrix out = Matrix::Zero(segments, av.cols());
  for (std::size_t i = 0; i < segment.size(); ++i) {
    require(segment[i] >= 0 && segment[i] < segments, "segment_mean: segment out of range");
    out.row(segment[i]) += av.row(static_cast<Index>(i));
    (*counts)[static_cast<std::size_t>(segment[i])] += 1.0;
  }
  for (Index s = 0; s < segments; ++s) {
    const double c = (*counts)[static_cast<std::size_t>(s)];
    if (c > 0) out.row(s) /= c;
  }
  auto shared = std::make_shared<IndexVector>(segment);
  return a.tape->record(std::move(out), {a}, [a, shared, counts](Tape& t, const Matrix& g) {
    const IndexVector& seg = *shared;
    Matrix ga(static_cast<Index>(seg.size()), g.cols());
    for (std::size_t i = 0; i < seg.size(); ++i) {
      ga.row(static_cast<Index>(i)) = g.row(seg[i]) / (*counts)[static_cast<std::size_t>(seg[i])];
    }
    t.accumulate(a, ga);
  });
}

Var pick(Var a, const IndexVector& idx) {
  const Matrix& av = a.value();
  require(static_cast<Index>(idx.size()) == av.rows(), "pick: one index per row required");
  Matrix out(av.rows(), 1);
  for (Index i = 0; i < av.rows(); ++i) {
    require(idx[static_cast<std::size_t>(i)] >= 0 && idx[static_cast<std::size_t>(i)] < av.cols(),
            "pick: column out of range");
    out(i, 0) = av(i, idx[static_cast<std::size_t>(i)]);
  }
  auto shared = std::make_shared<IndexVector>(idx);
  return a.tape->record(std::move(out), {a}, [a, shared](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad_buffer(a);
    for (Index i = 0; i < g.rows(); ++i) ga(i, (*shared)[static_cast<std::size_t>(i)]) += g(i, 0);
  });
}

Var transpose(Var a) {
  Matrix out = a.value().transpose();
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var diagonal(Var a) {
  require(a.rows() == a.cols(), "diagonal: square matrix required");
  Matrix out = a.value().diagonal();
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad_buffer(a);
    for (Index i = 0; i < g.rows(); ++i) ga(i, i) += g(i, 0);
  });
}

// ---- row/block operations ----

Var softmax_rows(Var a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (Index i = 0; i < av.rows(); ++i) {
    const double m = av.row(i).maxCoeff();
    out.row(i) = (av.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  auto y = std::make_shared<Matrix>(std::move(out));
  return a.tape->record(*y, {a}, [a, y](Tape& t, const Matrix& g) {
    const Eigen::VectorXd inner = g.cwiseProduct(*y).rowwise().sum();
    Matrix ga = y->cwiseProduct(Matrix(g.colwise() - inner));
    t.accumulate(a, ga);
  });
}

Var log_softmax_rows(Var a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (Index i = 0; i < av.rows(); ++i) {
    const double m = av.row(i).maxCoeff();
    const double lse = m + std::log((av.row(i).array() - m).exp().sum());
    out.row(i) = av.row(i).array() - lse;
  }
  auto y = std::make_shared<Matrix>(std::move(out));
  return a.tape->record(*y, {a}, [a, y](Tape& t, const Matrix& g) {
    const Eigen::VectorXd total = g.rowwise().sum();
    Matrix probs = y->array().exp();
    Matrix ga = g - Matrix(probs.array().colwise() * total.array());
    t.accumulate(a, ga);
  });
}

Var logsumexp_rows(Var a, bool exclude_diagonal) {
  const Matrix& av = a.value();
  if (exclude_diagonal) require(av.rows() == av.cols() && av.rows() >= 2, "logsumexp_rows: need square, >= 2 rows");
  Matrix out(av.rows(), 1);
  auto weights = std::make_shared<Matrix>(av.rows(), av.cols());
  for (Index i = 0; i < av.rows(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < av.cols(); ++j) {
      if (exclude_diagonal && i == j) continue;
      m = std::max(m, av(i, j));
    }
    double s = 0.0;
    for (Index j = 0; j < av.cols(); ++j) {
      const double e = (exclude_diagonal && i == j) ? 0.0 : std::exp(av(i, j) - m);
      (*weights)(i, j) = e;
      s += e;
    }
    (*weights).row(i) /= s;
    out(i, 0) = m + std::log(s);
  }
  return a.tape->record(std::move(out), {a}, [a, weights](Tape& t, const Matrix& g) {
    Matrix ga = weights->array().colwise() * g.col(0).array();
    t.accumulate(a, ga);
  });
}

Var block_normalize(Var a, Index blocks) {
  const Matrix& av = a.value();
  require(blocks > 0 && av.cols() % blocks == 0, "block_normalize: width not divisible by block count");
  const Index m = av.cols() / blocks;
  Matrix out = Matrix::Zero(av.rows(), av.cols());
  auto norms = std::make_shared<Matrix>(av.rows(), blocks);
  for (Index i = 0; i < av.rows(); ++i) {
    for (Index k = 0; k < blocks; ++k) {
      const double n = av.row(i).segment(k * m, m).norm();
      (*norms)(i, k) = n;
      if (n > 0) out.row(i).segment(k * m, m) = av.row(i).segment(k * m, m) / n;
    }
  }
  auto y = std::make_shared<Matrix>(std::move(out));
  return a.tape->record(*y, {a}, [a, y, norms, blocks, m](Tape& t, const Matrix& g) {
    Matrix ga = Matrix::Zero(g.rows(), g.cols());
    for (Index i = 0; i < g.rows(); ++i) {
      for (Index k = 0; k < blocks; ++k) {
        const double n = (*norms)(i, k);
        if (n <= 0) continue;
        const auto yb = y->row(i).segment(k * m, m);
        const auto gb = g.row(i).segment(k * m, m);
        ga.row(i).segment(k * m, m) = (gb - yb * yb.dot(gb)) / n;
      }
    }
    t.accumulate(a, ga);
  });
}

Var block_dot(Var a, Var b, Index blocks) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require(av.cols() == bv.cols() && blocks > 0 && av.cols() % blocks == 0, "block_dot: width mismatch");
  const bool broadcast = bv.rows() == 1 && av.rows() != 1;
  require(broadcast || bv.rows() == av.rows(), "block_dot: row mismatch");
  const Index m = av.cols() / blocks;
  Matrix out(av.rows(), blocks);
  for (Index i = 0; i < av.rows(); ++i) {
    const Index bi = broadcast ? 0 : i;
    for (Index k = 0; k < blocks; ++k) out(i, k) = av.row(i).segment(k * m, m).dot(bv.row(bi).segment(k * m, m));
  }
  return a.tape->record(std::move(out), {a, b}, [a, b, blocks, m, broadcast](Tape& t, const Matrix& g) {
    const Matrix& av2 = a.value();
    const Matrix& bv2 = b.value();
    if (a.requires_grad()) {
      Matrix ga(av2.rows(), av2.cols());
      for (Index i = 0; i < av2.rows(); ++i) {
        const Index bi = broadcast ? 0 : i;
        for (Index k = 0; k < blocks; ++k) ga.row(i).segment(k * m, m) = g(i, k) * bv2.row(bi).segment(k * m, m);
      }
      t.accumulate(a, ga);
    }
    if (b.requires_grad()) {
      Matrix gb = Matrix::Zero(bv2.rows(), bv2.cols());
      for (Index i = 0; i < av2.rows(); ++i) {
        const Index bi = broadcast ? 0 : i;
        for (Index k = 0; k < blocks; ++k) gb.row(bi).segment(k * m, m) += g(i, k) * av2.row(i).segment(k * m, m);
      }
      t.accumulate(b, gb);
    }
  });
}

Var block_gram(Var a, Index blocks) {
  const Matrix& av = a.value();
  require(blocks > 0 && av.cols() % blocks == 0, "block_gram: width not divisible by block count");
  const Index m = av.cols() / blocks;
  Matrix out(av.rows(), blocks * blocks);
  for (Index i = 0; i < av.rows(); ++i) {
    for (Index k = 0; k < blocks; ++k) {
      for (Index l = 0; l < blocks; ++l) {
        out(i, k * blocks + l) = av.row(i).segment(k * m, m).dot(av.row(i).segment(l * m, m));
      }
    }
  }
  return a.tape->record(std::move(out), {a}, [a, blocks, m](Tape& t, const Matrix& g) {
    const Matrix& av2 = a.value();
    Matrix ga = Matrix::Zero(av2.rows(), av2.cols());
    for (Index i = 0; i < av2.rows(); ++i) {
      for (Index k = 0; k < blocks; ++k) {
        for (Index l = 0; l < blocks; ++l) {
          const double gkl = g(i, k * blocks + l);
          ga.row(i).segment(k * m, m) += gkl * av2.row(i).segment(l * m, m);
          ga.row(i).segment(l * m, m) += gkl * av2.row(i).segment(k * m, m);
        }
      }
    }
    t.accumulate(a, ga);
  });
}

Var block_weighted_sum(Var a, Var w) {
  const Matrix& av = a.value();
  const Matrix& wv = w.value();
  const Index blocks = wv.cols();
  require(wv.rows() == av.rows() && blocks > 0 && av.cols() % blocks == 0, "block_weighted_sum: shape mismatch");
  const Index m = av.cols() / blocks;
  Matrix out = Matrix::Zero(av.rows(), m);
  for (Index i = 0; i < av.rows(); ++i) {
    for (Index k = 0; k < blocks; ++k) out.row(i) += wv(i, k) * av.row(i).segment(k * m, m);
  }
  return a.tape->record(std::move(out), {a, w}, [a, w, blocks, m](Tape& t, const Matrix& g) {
    const Matrix& av2 = a.value();
    const Matrix& wv2 = w.value();
    if (a.requires_grad()) {
      Matrix ga(av2.rows(), av2.cols());
      for (Index i = 0; i < av2.rows(); ++i) {
        for (Index k = 0; k < blocks; ++k) ga.row(i).segment(k * m, m) = wv2(i, k) * g.row(i);
      }
      t.accumulate(a, ga);
    }
    if (w.requires_grad()) {
      Matrix gw(wv2.rows(), blocks);
      for (Index i = 0; i < av2.rows(); ++i) {
        for (Index k = 0; k < blocks; ++k) gw(i, k) = g.row(i).dot(av2.row(i).segment(k * m, m));
      }
      t.accumulate(w, gw);
    }
  });
}

Var scale_blocks(Var a, Var c) {
  const Matrix& av = a.value();
  const Matrix& cv = c.value();
  const Index blocks = cv.cols();
  require(cv.rows() == av.rows() && blocks > 0 && av.cols() % blocks == 0, "scale_blocks: shape mismatch");
  const Index m = av.cols() / blocks;
  Matrix out(av.rows(), av.cols());
  for (Index i = 0; i < av.rows(); ++i) {
    for (Index k = 0; k < blocks; ++k) out.row(i).segment(k * m, m) = cv(i, k) * av.row(i).segment(k * m, m);
  }
  return a.tape->record(std::move(out), {a, c}, [a, c, blocks, m](Tape& t, const Matrix& g) {
    const Matrix& av2 = a.value();
    const Matrix& cv2 = c.value();
    if (a.requires_grad()) {
      Matrix ga(av2.rows(), av2.cols());
      for (Index i = 0; i < av2.rows(); ++i) {
        for (Index k = 0; k < blocks; ++k) ga.row(i).segment(k * m, m) = cv2(i, k) * g.row(i).segment(k * m, m);
      }
      t.accumulate(a, ga);
    }
    if (c.requires_grad()) {
      Matrix gc(cv2.rows(), blocks);
      for (Index i = 0; i < av2.rows(); ++i) {
        for (Index k = 0; k < blocks; ++k) gc(i, k) = g.row(i).segment(k * m, m).dot(av2.row(i).segment(k * m, m));
      }
      t.accumulate(c, gc);
    }
  });
}

Var block_matmul(Var a, const std::vector<Var>& mats) {
  const Index blocks = static_cast<Index>(mats.size());
  require(blocks > 0 && a.cols() % blocks == 0, "block_matmul: width not divisible by block count");
  const Index m = a.cols() / blocks;
  std::vector<Var> parts;
  parts.reserve(mats.size());
  for (Index k = 0; k < blocks; ++k) {
    parts.push_back(matmul(cols(a, k * m, m), mats[static_cast<std::size_t>(k)]));
  }
  return blocks == 1 ? parts.front() : hconcat(parts);
}

}  // namespace disensemi::ad
