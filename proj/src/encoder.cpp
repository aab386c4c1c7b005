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

#include "disensemi/encoder.hpp"

#include "disensemi/errors.hpp"
#include "disensemi/init.hpp"

namespace disensemi {

void EncoderConfig::validate() const {
  if (input_dim <= 0) throw InvalidArgument("encoder: input_dim must be positive");
  if (dim <= 0 || factors <= 0) throw InvalidArgument("encoder: dim and factors must be positive");
  if (dim % factors != 0) throw InvalidArgument("encoder: dim must be divisible by factors");
  if (layers < 1) throw InvalidArgument("encoder: need at least one message passing layer");
}

EncoderParams EncoderParams::initialize(const EncoderConfig& config, std::mt19937_64& rng, const std::string& prefix) {
  config.validate();
  const Index d = config.dim;
  const Index k = config.factors;
  const Index m = config.factor_dim();
  const Index h = config.hidden();
  EncoderParams p;
  p.config = config;
  p.projection = Parameter(prefix + ".projection", glorot_uniform(config.input_dim, d, rng));
  p.scorer_src = Parameter(prefix + ".scorer_src", glorot_uniform(d, k * h, rng));
  p.scorer_dst = Parameter(prefix + ".scorer_dst", glorot_uniform(d, k * h, rng));
  p.scorer_bias = Parameter(prefix + ".scorer_bias", Matrix::Zero(1, k * h));
  for (Index f = 0; f < k; ++f) {
    p.scorer_out.emplace_back(prefix + ".scorer_out." + std::to_string(f), glorot_uniform(h, 1, rng));
  }
  p.scorer_out_bias = Parameter(prefix + ".scorer_out_bias", Matrix::Zero(1, k));
  // Per-factor input transforms are independent d' x m blocks.
  Matrix input(config.input_dim, d);
  for (Index f = 0; f < k; ++f) input.middleCols(f * m, m) = glorot_uniform(config.input_dim, m, rng);
  p.factor_input = Parameter(prefix + ".factor_input", std::move(input));
  for (Index l = 0; l < config.layers; ++l) {
    MessagePassingLayer layer;
    for (Index f = 0; f < k; ++f) {
      const std::string tag = "." + std::to_string(l) + "." + std::to_string(f);
      layer.self_weights.emplace_back(prefix + ".self" + tag, glorot_uniform(m, m, rng));
      layer.neighbor_weights.emplace_back(prefix + ".neighbor" + tag, glorot_uniform(m, m, rng));
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

std::vector<Parameter*> EncoderParams::parameters() {
  std::vector<Parameter*> out{&projection, &scorer_src, &scorer_dst, &scorer_bias};
  for (auto& w : scorer_out) out.push_back(&w);
  out.push_back(&scorer_out_bias);
  out.push_back(&factor_input);
  for (auto& layer : layers) {
    for (auto& w : layer.self_weights) out.push_back(&w);
    for (auto& w : layer.neighbor_weights) out.push_back(&w);
  }
  return out;
}

EncoderVars bind(ad::Tape& tape, EncoderParams& params) {
  EncoderVars v;
  v.config = &params.config;
  v.projection = tape.param(params.projection);
  v.scorer_src = tape.param(params.scorer_src);
  v.scorer_dst = tape.param(params.scorer_dst);
  v.scorer_bias = tape.param(params.scorer_bias);
  for (auto& w : params.scorer_out) v.scorer_out.push_back(tape.param(w));
  v.scorer_out_bias = tape.param(params.scorer_out_bias);
  v.factor_input = tape.param(params.factor_input);
  for (auto& layer : params.layers) {
    std::vector<Var> self;
    std::vector<Var> neighbor;
    for (auto& w : layer.self_weights) self.push_back(tape.param(w));
    for (auto& w : layer.neighbor_weights) neighbor.push_back(tape.param(w));
    v.self_weights.push_back(std::move(self));
    v.neighbor_weights.push_back(std::move(neighbor));
  }
  return v;
}

Var compute_factor_coefficients(const Batch& batch, Var features, const EncoderVars& params) {
  if (features.cols() != params.config->input_dim) throw InvalidArgument("encoder: feature width mismatch");
  Var projected = ad::matmul(features, params.projection);
  Var src_part = ad::gather_rows(ad::matmul(projected, params.scorer_src), batch.edge_src);
  Var dst_part = ad::gather_rows(ad::matmul(projected, params.scorer_dst), batch.edge_dst);
  Var hidden = ad::relu(ad::add_row(ad::add(src_part, dst_part), params.scorer_bias));
  Var scores = ad::add_row(ad::block_matmul(hidden, params.scorer_out), params.scorer_out_bias);
  // sigmoid(s_k) / sum_j sigmoid(s_j) == softmax_k(log sigmoid(s_k)), and log sigmoid(s) = -softplus(-s).
  Var log_sigmoid = ad::scale(ad::softplus(ad::scale(scores, -1.0)), -1.0);
  return ad::softmax_rows(log_sigmoid);
}

Var message_passing(const Batch& batch, Var features, Var coefficients, const EncoderVars& params) {
  const Index n = batch.node_count();
  Var h = ad::matmul(features, params.factor_input);
  const std::size_t depth = params.self_weights.size();
  for (std::size_t l = 0; l < depth; ++l) {
    Var messages = ad::scale_blocks(ad::gather_rows(h, batch.edge_src), coefficients);
    Var aggregated = ad::scatter_add_rows(messages, batch.edge_dst, n);
    Var next = ad::add(ad::block_matmul(h, params.self_weights[l]), ad::block_matmul(aggregated, params.neighbor_weights[l]));
    h = (l + 1 < depth) ? ad::relu(next) : next;
  }
  return h;
}

Var readout(Var node_embeddings, const Batch& batch) {
  return ad::segment_mean(node_embeddings, batch.graph_ids, batch.graph_count());
}

EncodeResult encode(const Batch& batch, const EncoderVars& params) {
  if (batch.graph_count() == 0) throw InvalidArgument("encode: empty batch");
  Var features = params.projection.tape->constant(batch.features);
  EncodeResult r;
  r.coefficients = compute_factor_coefficients(batch, features, params);
  r.node_embeddings = message_passing(batch, features, r.coefficients, params);
  r.representations = readout(r.node_embeddings, batch);
  return r;
}

std::vector<Matrix> factor_matrices(const Matrix& representations, Index factors) {
  if (factors <= 0 || representations.cols() % factors != 0) throw InvalidArgument("factor_matrices: bad factor count");
  const Index m = representations.cols() / factors;
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(representations.rows()));
  for (Index g = 0; g < representations.rows(); ++g) {
    Matrix z(factors, m);
    for (Index k = 0; k < factors; ++k) z.row(k) = representations.row(g).segment(k * m, m);
    out.push_back(std::move(z));
  }
  return out;
}

}  // namespace disensemi
