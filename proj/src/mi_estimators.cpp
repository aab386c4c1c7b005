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

#include "disensemi/errors.hpp"
#include "disensemi/init.hpp"
#include "disensemi/logging.hpp"

#include <cmath>

namespace disensemi {

Discriminator::Discriminator(Index factors, Index factor_dim, std::mt19937_64& rng) {
  weights.reserve(static_cast<std::size_t>(factors));
  for (Index k = 0; k < factors; ++k) {
    weights.emplace_back("disc." + std::to_string(k), glorot_uniform(factor_dim, factor_dim, rng));
  }
}

Var jsd_bce_loss(Var pos_scores, Var neg_scores) {
  if (pos_scores.value().size() == 0 || neg_scores.value().size() == 0) {
    throw InvalidArgument("jsd_bce_loss: empty score vector");
  }
  return ad::add(ad::mean(ad::softplus(ad::scale(pos_scores, -1.0))), ad::mean(ad::softplus(neg_scores)));
}

double jsd_bce_loss(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  ad::Tape tape;
  const auto as_column = [](std::span<const double> s) {
    Matrix m(static_cast<Index>(s.size()), 1);
    for (std::size_t i = 0; i < s.size(); ++i) m(static_cast<Index>(i), 0) = s[i];
    return m;
  };
  return jsd_bce_loss(tape.constant(as_column(pos_scores)), tape.constant(as_column(neg_scores))).scalar();
}

Var nce_scores(Var anchors, Var candidates, double temperature) {
  if (anchors.cols() != candidates.cols()) throw InvalidArgument("nce_scores: row dimension mismatch");
  if (!(temperature > 0.0)) throw InvalidArgument("nce_scores: temperature must be positive");
  for (const Var& v : {anchors, candidates}) {
    if ((v.value().rowwise().squaredNorm().array() == 0.0).any()) {
      warn_once("nce_zero_norm", "zero-norm embedding in cosine similarity; treating its similarity as 0");
    }
  }
  Var a = ad::block_normalize(anchors, 1);
  Var c = ad::block_normalize(candidates, 1);
  return ad::scale(ad::matmul_nt(a, c), 1.0 / temperature);
}

Matrix nce_scores(const Matrix& anchors, const Matrix& candidates, double temperature) {
  ad::Tape tape;
  return nce_scores(tape.constant(anchors), tape.constant(candidates), temperature).value();
}

Var orthogonality_penalty(Var factor_columns) {
  const Index factors = factor_columns.cols();
  if (factors == 0) throw InvalidArgument("orthogonality_penalty: no factors");
  Var rows = ad::block_normalize(ad::transpose(factor_columns), 1);  // one factor per row
  Var gram = ad::matmul_nt(rows, rows);
  Var centered = ad::sub(gram, factor_columns.tape->constant(Matrix::Identity(factors, factors)));
  return ad::sum(ad::abs(centered));
}

double orthogonality_penalty(const Matrix& factor_columns) {
  ad::Tape tape;
  return orthogonality_penalty(tape.constant(factor_columns)).scalar();
}

Var orthogonality_penalty_rows(Var representations, Index factors) {
  if (factors <= 0) throw InvalidArgument("orthogonality_penalty_rows: no factors");
  Var normalized = ad::block_normalize(representations, factors);
  Var gram = ad::block_gram(normalized, factors);
  Matrix identity = Matrix::Zero(1, factors * factors);
  for (Index k = 0; k < factors; ++k) identity(0, k * factors + k) = -1.0;
  Var centered = ad::add_row(gram, representations.tape->constant(identity));
  return ad::row_sum(ad::abs(centered));
}

}  // namespace disensemi
