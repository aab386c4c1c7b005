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
#include "test_util.hpp"

#include <doctest.h>

using namespace disensemi;
using ad::Parameter;
using ad::Tape;
using ad::Var;

namespace {

// Runs a gradient check of sum(w .* op(a, b)) for random a, b, w.
void check_binary(const std::string& name, Index ar, Index ac, Index br, Index bc,
                  const std::function<Var(Var, Var)>& op, std::uint64_t seed = 1, bool positive = false) {
  std::mt19937_64 rng(seed);
  Parameter a("a", testutil::random_matrix(ar, ac, rng));
  Parameter b("b", testutil::random_matrix(br, bc, rng));
  if (positive) {
    a.value = a.value.array().abs() + 0.5;
    b.value = b.value.array().abs() + 0.5;
  }
  Matrix w;
  auto loss = [&](bool backward) {
    Tape t;
    Var out = op(t.param(a), t.param(b));
    if (w.size() == 0) w = testutil::random_matrix(out.rows(), out.cols(), rng);
    Var l = ad::weighted_sum(out, w);
    if (backward) t.backward(l);
    return l.scalar();
  };
  loss(false);
  auto bad = testutil::gradient_check({&a, &b}, loss, 1e-5, 1e-8);
  INFO(name);
  CHECK(bad.empty());
}

void check_unary(const std::string& name, Index r, Index c, const std::function<Var(Var)>& op, bool positive = false) {
  check_binary(name, r, c, 1, 1, [&](Var a, Var) { return op(a); }, 7, positive);
}

}  // namespace

TEST_CASE("elementwise and linear ops match central differences") {
  check_binary("matmul", 3, 4, 4, 2, [](Var a, Var b) { return ad::matmul(a, b); });
  check_binary("matmul_nt", 3, 4, 5, 4, [](Var a, Var b) { return ad::matmul_nt(a, b); });
  check_binary("add", 3, 4, 3, 4, [](Var a, Var b) { return ad::add(a, b); });
  check_binary("sub", 3, 4, 3, 4, [](Var a, Var b) { return ad::sub(a, b); });
  check_binary("hadamard", 3, 4, 3, 4, [](Var a, Var b) { return ad::hadamard(a, b); });
  check_binary("add_row", 3, 4, 1, 4, [](Var a, Var b) { return ad::add_row(a, b); });
  check_binary("scale_rows", 3, 4, 3, 1, [](Var a, Var b) { return ad::scale_rows(a, b); });
  check_unary("scale", 3, 4, [](Var a) { return ad::scale(a, -2.5); });
  check_unary("add_scalar", 3, 4, [](Var a) { return ad::add_scalar(a, 3.0); });
  check_unary("relu", 3, 4, [](Var a) { return ad::relu(a); });
  check_unary("sigmoid", 3, 4, [](Var a) { return ad::sigmoid(a); });
  check_unary("softplus", 3, 4, [](Var a) { return ad::softplus(a); });
  check_unary("exp", 3, 4, [](Var a) { return ad::exp(a); });
  check_unary("log", 3, 4, [](Var a) { return ad::log(a); }, true);
  check_unary("abs", 3, 4, [](Var a) { return ad::abs(a); });
  check_unary("clamp_min", 3, 4, [](Var a) { return ad::clamp_min(a, 0.1); });
}

TEST_CASE("reductions and structural ops match central differences") {
  check_unary("sum", 3, 4, [](Var a) { return ad::sum(a); });
  check_unary("mean", 3, 4, [](Var a) { return ad::mean(a); });
  check_unary("row_sum", 3, 4, [](Var a) { return ad::row_sum(a); });
  check_unary("cols", 3, 6, [](Var a) { return ad::cols(a, 2, 3); });
  check_binary("hconcat", 3, 2, 3, 3, [](Var a, Var b) { return ad::hconcat({a, b, a}); });
  check_unary("gather_rows", 3, 2, [](Var a) { return ad::gather_rows(a, {2, 0, 2, 1}); });
  check_unary("scatter_add_rows", 4, 2, [](Var a) { return ad::scatter_add_rows(a, {1, 0, 1, 2}, 3); });
  check_unary("segment_mean", 5, 2, [](Var a) { return ad::segment_mean(a, {0, 0, 1, 1, 1}, 2); });
  check_unary("pick", 3, 4, [](Var a) { return ad::pick(a, {3, 0, 1}); });
  check_unary("transpose", 3, 4, [](Var a) { return ad::transpose(a); });
  check_unary("diagonal", 4, 4, [](Var a) { return ad::diagonal(a); });
}

TEST_CASE("row and block ops match central differences") {
  check_unary("softmax_rows", 3, 4, [](Var a) { return ad::softmax_rows(a); });
  check_unary("log_softmax_rows", 3, 4, [](Var a) { return ad::log_softmax_rows(a); });
  check_unary("logsumexp_rows", 4, 4, [](Var a) { return ad::logsumexp_rows(a); });
  check_unary("logsumexp_rows excl", 4, 4, [](Var a) { return ad::logsumexp_rows(a, true); });
  check_unary("block_normalize", 3, 6, [](Var a) { return ad::block_normalize(a, 3); });
  check_binary("block_dot", 3, 6, 3, 6, [](Var a, Var b) { return ad::block_dot(a, b, 2); });
  check_binary("block_dot broadcast", 3, 6, 1, 6, [](Var a, Var b) { return ad::block_dot(a, b, 3); });
  check_unary("block_gram", 3, 6, [](Var a) { return ad::block_gram(a, 3); });
  check_binary("block_weighted_sum", 3, 6, 3, 2, [](Var a, Var b) { return ad::block_weighted_sum(a, b); });
  check_binary("scale_blocks", 3, 6, 3, 3, [](Var a, Var b) { return ad::scale_blocks(a, b); });
  check_binary("block_matmul", 3, 4, 2, 3, [](Var a, Var b) { return ad::block_matmul(a, {b, ad::scale(b, 2.0)}); });
}

TEST_CASE("forward values of reductions") {
  Tape t;
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  Var a = t.constant(m);
  CHECK(ad::sum(a).scalar() == doctest::Approx(21));
  CHECK(ad::mean(a).scalar() == doctest::Approx(3.5));
  Matrix sm = ad::softmax_rows(a).value();
  CHECK(sm.row(0).sum() == doctest::Approx(1.0));
  CHECK(sm(0, 2) / sm(0, 1) == doctest::Approx(std::exp(1.0)));
  Var lse = ad::logsumexp_rows(t.constant(Matrix::Zero(3, 3)), true);
  CHECK(lse.value()(0, 0) == doctest::Approx(std::log(2.0)));
  Var seg = ad::segment_mean(a, {0, 0}, 1);
  CHECK(seg.value()(0, 1) == doctest::Approx(3.5));
}

TEST_CASE("gradients accumulate across uses and into parameters") {
  Parameter p("p", Matrix::Constant(1, 1, 3.0));
  Tape t;
  Var x = t.param(p);
  Var y = ad::add(ad::hadamard(x, x), x);  // x^2 + x
  t.backward(y);
  CHECK(p.grad(0, 0) == doctest::Approx(7.0));
  CHECK(t.grad(x)(0, 0) == doctest::Approx(7.0));
}

TEST_CASE("backward requires a scalar") {
  Tape t;
  Var a = t.constant(Matrix::Zero(2, 2));
  CHECK_THROWS(t.backward(a));
}
