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

#include "disensemi/consistency.hpp"
#include "disensemi/encoder.hpp"
#include "disensemi/supervised_head.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace disensemi;
using ad::Tape;

namespace {

Matrix alignment(const Matrix& s, const Matrix& u, Index k, AlignmentOptions opts = {}) {
  Tape t;
  return alignment_log_likelihood(t.constant(s), t.constant(u), k, opts).value();
}

Matrix random_simplex(Index rows, Index cols, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(1.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng) + 1e-6;
  for (Index i = 0; i < rows; ++i) m.row(i) /= m.row(i).sum();
  return m;
}

double cosine(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) { return a.dot(b) / (a.norm() * b.norm()); }

}  // namespace

TEST_CASE("alignment examples") {
  Matrix same = Matrix::Constant(2, 3, 1.0 / std::sqrt(3.0));
  CHECK(alignment(same, same, 1).isZero(1e-12));

  // z_S(G_0) equals z_U(G_0) and is orthogonal to z_U of the other two graphs
  Matrix s(3, 3), u(3, 3);
  s << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  u = s;
  Matrix ll = alignment(s, u, 1);
  CHECK(ll(0, 0) == doctest::Approx(1.0 - std::log(2.0)));

  std::mt19937_64 rng(0);
  Matrix a = testutil::random_matrix(4, 6, rng), b = testutil::random_matrix(4, 6, rng);
  CHECK(alignment(Matrix(a * 10.0), Matrix(b * 10.0), 2).isApprox(alignment(a, b, 2), 1e-12));
}

TEST_CASE("alignment rejects a single graph and mismatched inputs") {
  Tape t;
  CHECK_THROWS_AS(per_factor_alignment(t.constant(Matrix::Ones(1, 4)), t.constant(Matrix::Ones(1, 4)), 0, 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(per_factor_alignment(t.constant(Matrix::Ones(2, 4)), t.constant(Matrix::Ones(3, 4)), 0, 2),
                  std::invalid_argument);
}

TEST_CASE("alignment matches a direct loop over the batch") {
  std::mt19937_64 rng(1);
  Matrix s = testutil::random_matrix(5, 6, rng), u = testutil::random_matrix(5, 6, rng);
  for (bool inclusive : {false, true}) {
    AlignmentOptions opts;
    opts.temperature = 0.7;
    opts.denominator = inclusive ? Denominator::IncludePositive : Denominator::ExcludePositive;
    Matrix ll = alignment(s, u, 3, opts);
    for (Index i = 0; i < 5; ++i) {
      for (Index k = 0; k < 3; ++k) {
        const double num = cosine(s.row(i).segment(k * 2, 2), u.row(i).segment(k * 2, 2)) / 0.7;
        double den = 0.0;
        for (Index j = 0; j < 5; ++j) {
          if (j == i && !inclusive) continue;
          den += std::exp(cosine(s.row(i).segment(k * 2, 2), u.row(j).segment(k * 2, 2)) / 0.7);
        }
        CHECK(ll(i, k) == doctest::Approx(num - std::log(den)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("e-step examples") {
  Matrix prior(1, 2), lik(1, 2);
  prior << 0.5, 0.5;
  lik << std::log(0.8), std::log(0.2);
  Matrix q = e_step(prior, lik);
  CHECK(q(0, 0) == doctest::Approx(0.8));
  CHECK(q(0, 1) == doctest::Approx(0.2));
  CHECK(e_step(Matrix::Ones(3, 1), Matrix::Constant(3, 1, -4.0)).isApprox(Matrix::Ones(3, 1)));
  Matrix uniform = Matrix::Constant(2, 4, 0.25);
  CHECK(e_step(uniform, Matrix::Constant(2, 4, -1.3)).isApprox(uniform));
}

TEST_CASE("elbo examples") {
  Matrix q(1, 2), prior(1, 2), ll(1, 2);
  q << 0.8, 0.2;
  prior << 0.5, 0.5;
  ll << -0.1, -1.0;
  const double kl = 0.8 * std::log(1.6) + 0.2 * std::log(0.4);
  CHECK(elbo(q, ll, prior) == doctest::Approx(-0.28 - kl).epsilon(1e-12));
  CHECK(elbo(q, ll, prior) == doctest::Approx(-0.4727).epsilon(1e-4));
  std::mt19937_64 rng(2);
  Matrix a = random_simplex(3, 4, rng);
  CHECK(elbo(a, Matrix::Zero(3, 4), a) == doctest::Approx(0.0));
  CHECK(elbo(a, Matrix::Constant(3, 4, -2.5), a) == doctest::Approx(-2.5));
}

TEST_CASE("kl term is nonnegative and vanishes only at the prior") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix q = random_simplex(1, 3, rng), prior = random_simplex(1, 3, rng);
    // with zero likelihood the ELBO is exactly -KL(q || prior)
    const double kl = -elbo(q, Matrix::Zero(1, 3), prior);
    CHECK(kl >= 0.0);
    CHECK(kl > 1e-12);
    CHECK(-elbo(prior, Matrix::Zero(1, 3), prior) == doctest::Approx(0.0));
  }
}

TEST_CASE("elbo lower-bounds the log marginal and is tight at the e-step") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix prior = random_simplex(4, 3, rng);
    const Matrix ll = testutil::random_matrix(4, 3, rng);
    const Matrix q = random_simplex(4, 3, rng);
    const double marginal = log_marginal(prior, ll).mean();
    CHECK(elbo(q, ll, prior) <= marginal + 1e-8);
    const Matrix best = e_step(prior, ll);
    CHECK(std::abs(elbo(best, ll, prior) - marginal) < 1e-8);
    for (Index i = 0; i < 4; ++i) CHECK(best.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("a zero prior entry is floored instead of producing infinity") {
  Matrix q(1, 2), prior(1, 2);
  q << 0.5, 0.5;
  prior << 1.0, 0.0;
  const double v = elbo(q, Matrix::Zero(1, 2), prior);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(0.5 * std::log(1e-7) - std::log(0.5)));
}

TEST_CASE("full-dataset posterior equals the batch posterior with the inclusive denominator") {
  std::mt19937_64 rng(5);
  const Index n = 8, k = 2, m = 3;
  const Matrix s = testutil::random_matrix(n, k * m, rng), u = testutil::random_matrix(n, k * m, rng);
  const Matrix prior = random_simplex(n, k, rng);
  AlignmentOptions opts;
  opts.denominator = Denominator::IncludePositive;
  const Matrix q = e_step(s, u, prior, k, opts);
  for (Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd joint(k);
    for (Index f = 0; f < k; ++f) {
      double den = 0.0;
      for (Index j = 0; j < n; ++j) den += std::exp(cosine(s.row(i).segment(f * m, m), u.row(j).segment(f * m, m)));
      joint(f) = prior(i, f) * std::exp(cosine(s.row(i).segment(f * m, m), u.row(i).segment(f * m, m))) / den;
    }
    joint /= joint.sum();
    CHECK((q.row(i) - joint).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("elbo gradients reach both encoders' outputs and the prior") {
  std::mt19937_64 rng(6);
  ad::Parameter s("s", testutil::random_matrix(4, 6, rng));
  ad::Parameter u("u", testutil::random_matrix(4, 6, rng));
  ad::Parameter logits("logits", testutil::random_matrix(4, 3, rng));
  // q stays frozen across the finite-difference probes
  Matrix q;
  {
    Tape t;
    Var ll = alignment_log_likelihood(t.constant(s.value), t.constant(u.value), 3);
    q = e_step(ad::softmax_rows(t.constant(logits.value)).value(), ll.value());
  }
  for (bool detach : {false, true}) {
    auto loss = [&](bool backward) {
      Tape t;
      Var ll = alignment_log_likelihood(t.param(s), t.param(u), 3);
      Var l = ad::scale(elbo(q, ll, ad::softmax_rows(t.param(logits)), detach), -1.0);
      if (backward) t.backward(l);
      return l.scalar();
    };
    if (detach) {
      logits.zero_grad();
      loss(true);
      CHECK(logits.grad.isZero());
    } else {
      auto bad = testutil::gradient_check({&s, &u, &logits}, loss, 1e-4);
      CHECK(bad.empty());
      CHECK_FALSE(logits.grad.isZero());
    }
  }
}
