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

// Mutual-information objective pieces shared by the unsupervised and
// consistency losses.

#include "disensemi/autodiff.hpp"

#include <random>
#include <span>

namespace disensemi {

using ad::Index;
using ad::Matrix;
using ad::Var;

/// Bilinear global-local critic, one (d/K) x (d/K) matrix per factor.
/// Score of (x, y) under factor k is x^T M_k y.
struct Discriminator {
  std::vector<ad::Parameter> weights;

  Discriminator() = default;
  Discriminator(Index factors, Index factor_dim, std::mt19937_64& rng);
  Index factors() const { return static_cast<Index>(weights.size()); }
};

/// Binary cross-entropy form of the Jensen-Shannon MI bound:
/// mean(softplus(-pos)) + mean(softplus(neg)). Minimizing it maximizes the bound.
Var jsd_bce_loss(Var pos_scores, Var neg_scores);
double jsd_bce_loss(std::span<const double> pos_scores, std::span<const double> neg_scores);

/// (i, j) = cos(anchor_i, candidate_j) / temperature. Zero rows give 0.
Var nce_scores(Var anchors, Var candidates, double temperature);
Matrix nce_scores(const Matrix& anchors, const Matrix& candidates, double temperature);

/// Entrywise L1 norm of (Z^T Z - I) after unit-normalizing the columns of Z.
/// `factor_columns` holds one factor per column.
Var orthogonality_penalty(Var factor_columns);
double orthogonality_penalty(const Matrix& factor_columns);

/// Orthogonality penalty for every row of a (graphs x K*m) representation,
/// reading each row as K factor blocks. Returns graphs x 1.
Var orthogonality_penalty_rows(Var representations, Index factors);

}  // namespace disensemi
