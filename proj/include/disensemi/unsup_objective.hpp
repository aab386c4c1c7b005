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

// Unsupervised disentanglement objective: per-factor global-local MI
// maximization plus inter-factor orthogonality.

#include "disensemi/graph_data.hpp"
#include "disensemi/mi_estimators.hpp"

#include <random>

namespace disensemi {

/// One positive and one negative pair per node. The positive pairs node v
/// with its own graph summary; the negative pairs the same summary with a
/// node drawn uniformly from the other graphs of the batch.
struct GlobalLocalPairs {
  ad::IndexVector anchor_graph;   // graph of node v
  ad::IndexVector positive_node;  // v
  ad::IndexVector negative_node;  // node of another graph
  Matrix weight;                  // pairs x 1, 1 / (|V(G)| * graph_count)
};

GlobalLocalPairs sample_global_local_pairs(const Batch& batch, std::mt19937_64& rng);

std::vector<Var> bind(ad::Tape& tape, Discriminator& disc);

/// Sum over factors of the node-averaged, graph-averaged BCE critic loss.
Var intra_factor_loss(Var representations, Var node_embeddings, const GlobalLocalPairs& pairs,
                      const std::vector<Var>& discriminator);

/// Positive and negative critic scores, pairs x K.
std::pair<Var, Var> critic_scores(Var representations, Var node_embeddings, const GlobalLocalPairs& pairs,
                                  const std::vector<Var>& discriminator);

/// Mean over graphs of the orthogonality penalty of each K x (d/K) factor matrix.
Var inter_factor_loss(Var representations, Index factors);

struct UnsupervisedTerms {
  Var intra;
  Var inter;
  Var total;
};

/// L_U = intra + inter; a disabled term contributes a constant zero.
UnsupervisedTerms unsupervised_loss(Var representations, Var node_embeddings, const GlobalLocalPairs& pairs,
                                    const std::vector<Var>& discriminator, bool use_intra = true, bool use_inter = true);

}  // namespace disensemi
