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

#include "disensemi/mi_estimators.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <vector>

using namespace disensemi;
using ad::Parameter;
using ad::Tape;

namespace {

double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

double jsd(std::vector<double> pos, std::vector<double> neg) { return jsd_bce_loss(pos, neg); }

}  // namespace

TEST_CASE("jsd loss examples") {
  CHECK(jsd({0.0}, {0.0}) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  // -log sigma(20) - log(1 - sigma(-20)) = 2 log(1 + e^-20)
  CHECK(jsd({20.0}, {-20.0}) == doctest::Approx(2.0 * std::log1p(std::exp(-20.0))).epsilon(1e-9));
  CHECK(jsd({20.0}, {-20.0}) == doctest::Approx(4.122307e-9).epsilon(1e-5));
  CHECK(jsd({1.0, -1.0}, {0.0}) == doctest::Approx((softplus(-1) + softplus(1)) / 2 + softplus(0)).epsilon(1e-12));
  CHECK_THROWS_AS(jsd({}, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(jsd({0.0}, {}), std::invalid_argument);
}

TEST_CASE("jsd loss is nonnegative and monotone") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> pos{n(rng), n(rng)}, neg{n(rng), n(rng), n(rng)};
    const double base = jsd(pos, neg);
    CHECK(base >= 0.0);
    auto up = pos;
    up[0] += 0.5;
    CHECK(jsd(up, neg) < base);
    auto worse = neg;
    worse[1] += 0.5;
    CHECK(jsd(pos, worse) > base);
  }
}

TEST_CASE("nce scores examples") {
  Matrix eye = Matrix::Identity(3, 3);
  CHECK(nce_scores(eye, eye, 1.0).isApprox(eye));
  Matrix x(1, 3);
  x << 0.3, -2.0, 1.0;
  CHECK(nce_scores(x, Matrix(-x), 1.0)(0, 0) == doctest::Approx(-1.0));
  Matrix v(2, 2);
  v << 1, 0, 1, 1;
  v.row(1) /= std::sqrt(2.0);
  Matrix s = nce_scores(v, v, 1.0);
  CHECK(s(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(s(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(nce_scores(v, v, 0.5)(0, 1) == doctest::Approx(2.0 / std::sqrt(2.0)));
  CHECK_THROWS_AS(nce_scores(v, Matrix::Ones(2, 3), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(nce_scores(v, v, 0.0), std::invalid_argument);
}

TEST_CASE("nce scores treat zero rows as zero similarity") {
  Matrix a = Matrix::Zero(2, 3);
  a(1, 0) = 2.0;
  Matrix s = nce_scores(a, a, 1.0);
  CHECK(s.row(0).isZero());
  CHECK(s.col(0).isZero());
  CHECK(s(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("nce scores are row-scale invariant") {
  std::mt19937_64 rng(5);
  Matrix a = testutil::random_matrix(4, 5, rng), b = testutil::random_matrix(3, 5, rng);
  Matrix s = nce_scores(a, b, 0.7);
  a.row(2) *= 13.0;
  b.row(0) *= 0.01;
  CHECK(nce_scores(a, b, 0.7).isApprox(s, 1e-12));
}

TEST_CASE("orthogonality penalty examples") {
  CHECK(orthogonality_penalty(Matrix(Matrix::Identity(4, 3))) == doctest::Approx(0.0));
  Matrix same(3, 2);
  same << 1, 1, 2, 2, -1, -1;
  CHECK(orthogonality_penalty(same) == doctest::Approx(2.0));
  std::mt19937_64 rng(0);
  CHECK(orthogonality_penalty(testutil::random_matrix(5, 1, rng)) == doctest::Approx(0.0));
  CHECK_THROWS_AS(orthogonality_penalty(Matrix(3, 0)), std::invalid_argument);
}

TEST_CASE("orthogonality penalty is invariant to column permutation and sign flips") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix z = testutil::random_matrix(6, 4, rng);
    const double base = orthogonality_penalty(z);
    Matrix p(6, 4);
    p << z.col(2), z.col(0), z.col(3), z.col(1);
    CHECK(orthogonality_penalty(p) == doctest::Approx(base).epsilon(1e-12));
    Matrix f = z;
    f.col(1) *= -1.0;
    f.col(3) *= -1.0;
    CHECK(orthogonality_penalty(f) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("row-wise penalty matches the column form per graph") {
  std::mt19937_64 rng(2);
  Matrix reps = testutil::random_matrix(3, 12, rng);
  Tape t;
  Matrix rows = orthogonality_penalty_rows(t.constant(reps), 4).value();
  for (Index g = 0; g < 3; ++g) {
    Matrix cols(3, 4);
    for (Index k = 0; k < 4; ++k) cols.col(k) = reps.row(g).segment(k * 3, 3).transpose();
    CHECK(rows(g, 0) == doctest::Approx(orthogonality_penalty(cols)));
  }
}

TEST_CASE("gradients of the three estimators match central differences") {
  std::mt19937_64 rng(17);
  Parameter pos("pos", testutil::random_matrix(4, 1, rng));
  Parameter neg("neg", testutil::random_matrix(5, 1, rng));
  auto jsd_loss = [&](bool backward) {
    Tape t;
    Var l = jsd_bce_loss(t.param(pos), t.param(neg));
    if (backward) t.backward(l);
    return l.scalar();
  };
  CHECK(testutil::gradient_check({&pos, &neg}, jsd_loss, 1e-4).empty());

  Parameter a("a", testutil::random_matrix(3, 4, rng));
  Parameter b("b", testutil::random_matrix(5, 4, rng));
  const Matrix w = testutil::random_matrix(3, 5, rng);
  auto nce_loss = [&](bool backward) {
    Tape t;
    Var l = ad::weighted_sum(nce_scores(t.param(a), t.param(b), 0.5), w);
    if (backward) t.backward(l);
    return l.scalar();
  };
  CHECK(testutil::gradient_check({&a, &b}, nce_loss, 1e-4).empty());

  Parameter z("z", testutil::random_matrix(5, 3, rng));
  auto orth_loss = [&](bool backward) {
    Tape t;
    Var l = orthogonality_penalty(t.param(z));
    if (backward) t.backward(l);
    return l.scalar();
  };
  CHECK(testutil::gradient_check({&z}, orth_loss, 1e-4).empty());
}

TEST_CASE("discriminator has one square bilinear map per factor") {
  std::mt19937_64 rng(0);
  Discriminator d(3, 5, rng);
  REQUIRE(d.factors() == 3);
  for (const auto& w : d.weights) {
    CHECK(w.value.rows() == 5);
    CHECK(w.value.cols() == 5);
    CHECK(w.value.allFinite());
  }
}
