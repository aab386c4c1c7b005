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

#include "disensemi/unsup_objective.hpp"

#include "disensemi/errors.hpp"

namespace disensemi {

GlobalLocalPairs sample_global_local_pairs(const Batch& batch, std::mt19937_64& rng) {
  const Index graphs = batch.graph_count();
  if (graphs < 2) {
    throw InvalidArgument("intra-factor loss needs at least 2 graphs per batch for negatives; increase the unlabeled batch size");
  }
  const Index n = batch.node_count();
  GlobalLocalPairs p;
  p.anchor_graph.reserve(static_cast<std::size_t>(n));
  p.positive_node.reserve(static_cast<std::size_t>(n));
  p.negative_node.reserve(static_cast<std::size_t>(n));
  p.weight.resize(n, 1);
  for (Index v = 0; v < n; ++v) {
    const Index g = batch.graph_ids[static_cast<std::size_t>(v)];
    const Index begin = batch.node_offsets[static_cast<std::size_t>(g)];
    const Index own = batch.nodes_in(g);
    std::uniform_int_distribution<Index> pick(0, n - own - 1);
    Index u = pick(rng);
    if (u >= begin) u += own;  // skip the anchor graph's node range
    p.anchor_graph.push_back(g);
    p.positive_node.push_back(v);
    p.negative_node.push_back(u);
    p.weight(v, 0) = 1.0 / (static_cast<double>(own) * static_cast<double>(graphs));
  }
  return p;
}

std::vector<Var> bind(ad::Tape& tape, Discriminator& disc) {
  std::vector<Var> out;
  out.reserve(disc.weights.size());
  for (auto& w : disc.weights) out.push_back(tape.param(w));
  return out;
}

std::pair<Var, Var> critic_scores(Var representations, Var node_embeddings, const GlobalLocalPairs& pairs,
                                  const std::vector<Var>& discriminator) {
  const auto factors = static_cast<Index>(discriminator.size());
  // Row g, block k of `projected` is z_k(G_g)^T M_k.
  Var projected = ad::block_matmul(representations, discriminator);
  Var anchors = ad::gather_rows(projected, pairs.anchor_graph);
  Var pos = ad::block_dot(anchors, ad::gather_rows(node_embeddings, pairs.positive_node), factors);
  Var neg = ad::block_dot(anchors, ad::gather_rows(node_embeddings, pairs.negative_node), factors);
  return {pos, neg};
}

Var intra_factor_loss(Var representations, Var node_embeddings, const GlobalLocalPairs& pairs,
                      const std::vector<Var>& discriminator) {
  auto [pos, neg] = critic_scores(representations, node_embeddings, pairs, discriminator);
  const Matrix w = pairs.weight.replicate(1, pos.cols());
  // Per graph this is jsd_bce_loss over its nodes; weights average over nodes then graphs.
  return ad::add(ad::weighted_sum(ad::softplus(ad::scale(pos, -1.0)), w), ad::weighted_sum(ad::softplus(neg), w));
}

Var inter_factor_loss(Var representations, Index factors) {
  return ad::mean(orthogonality_penalty_rows(representations, factors));
}

UnsupervisedTerms unsupervised_loss(Var representations, Var node_embeddings, const GlobalLocalPairs& pairs,
                                    const std::vector<Var>& discriminator, bool use_intra, bool use_inter) {
  UnsupervisedTerms t;
  ad::Tape& tape = *representations.tape;
  t.intra = use_intra ? intra_factor_loss(representations, node_embeddings, pairs, discriminator)
                      : tape.constant(Matrix::Zero(1, 1));
  t.inter = use_inter ? inter_factor_loss(representations, static_cast<Index>(discriminator.size()))
                      : tape.constant(Matrix::Zero(1, 1));
  t.total = ad::add(t.intra, t.inter);
  return t;
}

}  // namespace disensemi
