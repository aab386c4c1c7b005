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

// Prototype attention over factors followed by a two-layer classifier.

#include "disensemi/autodiff.hpp"

#include <random>
#include <vector>

namespace disensemi {

using ad::Index;
using ad::Matrix;
using ad::Parameter;
using ad::Var;

struct HeadConfig {
  Index factors = 4;
  Index factor_dim = 32;
  /// Classifier hidden width; 0 means factor_dim.
  Index hidden = 0;
  int classes = 2;

  Index hidden_width() const { return hidden > 0 ? hidden : factor_dim; }
};

struct SupervisedHeadParams {
  HeadConfig config;
  Parameter prototypes;  // 1 x (K * m); block k is prototype c_k
  Parameter hidden_weight;
  Parameter hidden_bias;
  Parameter output_weight;
  Parameter output_bias;

  static SupervisedHeadParams initialize(const HeadConfig& config, std::mt19937_64& rng);
  std::vector<Parameter*> parameters();
};

struct HeadVars {
  const HeadConfig* config = nullptr;
  Var prototypes, hidden_weight, hidden_bias, output_weight, output_bias;
};

HeadVars bind(ad::Tape& tape, SupervisedHeadParams& params);

/// graphs x K softmax over k of cos(z_k, c_k).
Var factor_attention(Var representations, Var prototypes, Index factors);

/// Attention-weighted factor mixture, graphs x m.
Var mix_factors(Var representations, Var attention);

/// Class probabilities, graphs x C.
Var predict(Var representations, Var attention, const HeadVars& head);

struct SupervisedLoss {
  Var loss;  // 1x1, zero when no graph is labeled
  bool has_labeled = false;
};

/// Mean of -log(max(p[label], 1e-7)) over graphs with mask set.
SupervisedLoss supervised_loss(Var probabilities, const std::vector<int>& labels, const std::vector<bool>& mask);

}  // namespace disensemi
