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

// Disentangled graph encoder. Each input graph is split into K soft factor
// graphs by per-edge coefficients; every factor runs its own GraphConv
// channel and a mean readout produces one d/K embedding per factor.
//
// Representations are laid out as rows of width d = K * (d/K): block k of a
// row holds factor k. Node embeddings use the same layout.

#include "disensemi/autodiff.hpp"
#include "disensemi/graph_data.hpp"

#include <random>
#include <vector>

namespace disensemi {

using ad::Parameter;
using ad::Var;

struct EncoderConfig {
  Index input_dim = 0;
  Index dim = 128;
  Index factors = 4;
  Index layers = 3;
  /// Hidden width of each factor scorer; 0 means `dim`.
  Index scorer_hidden = 0;

  Index factor_dim() const { return dim / factors; }
  Index hidden() const { return scorer_hidden > 0 ? scorer_hidden : dim; }
  void validate() const;
};

struct MessagePassingLayer {
  std::vector<Parameter> self_weights;      // K of (d/K) x (d/K)
  std::vector<Parameter> neighbor_weights;  // K of (d/K) x (d/K)
};

/// All weights are stored input-major (x * W), so shapes read fan_in x fan_out.
struct EncoderParams {
  EncoderConfig config;
  Parameter projection;               // d' x d, shared endpoint projection
  Parameter scorer_src;               // d x (K * hidden), first scorer layer, source half
  Parameter scorer_dst;               // d x (K * hidden), first scorer layer, target half
  Parameter scorer_bias;              // 1 x (K * hidden)
  std::vector<Parameter> scorer_out;  // K of hidden x 1
  Parameter scorer_out_bias;          // 1 x K
  Parameter factor_input;             // d' x d; block k is the factor-k input transform
  std::vector<MessagePassingLayer> layers;

  static EncoderParams initialize(const EncoderConfig& config, std::mt19937_64& rng, const std::string& prefix = "enc");
  std::vector<Parameter*> parameters();
};

/// Encoder parameters bound to a tape.
struct EncoderVars {
  const EncoderConfig* config = nullptr;
  Var projection, scorer_src, scorer_dst, scorer_bias, scorer_out_bias, factor_input;
  std::vector<Var> scorer_out;
  std::vector<std::vector<Var>> self_weights;      // [layer][factor]
  std::vector<std::vector<Var>> neighbor_weights;  // [layer][factor]
};

EncoderVars bind(ad::Tape& tape, EncoderParams& params);

/// Edge x K coefficients: sigmoid(psi_k(W x_u, W x_v)) divided by its sum over k.
Var compute_factor_coefficients(const Batch& batch, Var features, const EncoderVars& params);

/// Layer-L node embeddings (nodes x d), factor k in block k.
Var message_passing(const Batch& batch, Var features, Var coefficients, const EncoderVars& params);

/// Per-graph mean of node embeddings (graphs x d).
Var readout(Var node_embeddings, const Batch& batch);

struct EncodeResult {
  Var coefficients;
  Var node_embeddings;
  Var representations;
};

EncodeResult encode(const Batch& batch, const EncoderVars& params);

/// Splits a (graphs x K*m) representation into per-graph K x m matrices.
std::vector<Matrix> factor_matrices(const Matrix& representations, Index factors);

}  // namespace disensemi
