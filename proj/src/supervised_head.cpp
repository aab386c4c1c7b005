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

#include "disensemi/supervised_head.hpp"

#include "disensemi/errors.hpp"
#include "disensemi/init.hpp"

namespace disensemi {

namespace {
constexpr double kProbabilityFloor = 1e-7;
}

SupervisedHeadParams SupervisedHeadParams::initialize(const HeadConfig& config, std::mt19937_64& rng) {
  if (config.factors <= 0 || config.factor_dim <= 0 || config.classes <= 0) {
    throw InvalidArgument("supervised head: factors, factor_dim and classes must be positive");
  }
  const Index k = config.factors;
  const Index m = config.factor_dim;
  const Index h = config.hidden_width();
  SupervisedHeadParams p;
  p.config = config;
  Matrix protos = unit_rows(k, m, rng);
  p.prototypes = Parameter("head.prototypes", Eigen::Map<Matrix>(protos.data(), 1, k * m));
  p.hidden_weight = Parameter("head.hidden_weight", glorot_uniform(m, h, rng));
  p.hidden_bias = Parameter("head.hidden_bias", Matrix::Zero(1, h));
  p.output_weight = Parameter("head.output_weight", glorot_uniform(h, config.classes, rng));
  p.output_bias = Parameter("head.output_bias", Matrix::Zero(1, config.classes));
  return p;
}

std::vector<Parameter*> SupervisedHeadParams::parameters() {
  return {&prototypes, &hidden_weight, &hidden_bias, &output_weight, &output_bias};
}

HeadVars bind(ad::Tape& tape, SupervisedHeadParams& params) {
  HeadVars v;
  v.config = &params.config;
  v.prototypes = tape.param(params.prototypes);
  v.hidden_weight = tape.param(params.hidden_weight);
  v.hidden_bias = tape.param(params.hidden_bias);
  v.output_weight = tape.param(params.output_weight);
  v.output_bias = tape.param(params.output_bias);
  return v;
}

Var factor_attention(Var representations, Var prototypes, Index factors) {
  if (prototypes.rows() != 1 || prototypes.cols() != representations.cols()) {
    throw InvalidArgument("factor_attention: prototype shape does not match representations");
  }
  Var cosine = ad::block_dot(ad::block_normalize(representations, factors), ad::block_normalize(prototypes, factors), factors);
  return ad::softmax_rows(cosine);
}

Var mix_factors(Var representations, Var attention) {
  return ad::block_weighted_sum(representations, attention);
}

Var predict(Var representations, Var attention, const HeadVars& head) {
  Var mixed = mix_factors(representations, attention);
  Var hidden = ad::relu(ad::add_row(ad::matmul(mixed, head.hidden_weight), head.hidden_bias));
  Var logits = ad::add_row(ad::matmul(hidden, head.output_weight), head.output_bias);
  return ad::softmax_rows(logits);
}

SupervisedLoss supervised_loss(Var probabilities, const std::vector<int>& labels, const std::vector<bool>& mask) {
  const Index rows = probabilities.rows();
  if (static_cast<Index>(labels.size()) != rows || static_cast<Index>(mask.size()) != rows) {
    throw InvalidArgument("supervised_loss: labels/mask size mismatch");
  }
  ad::IndexVector picked(static_cast<std::size_t>(rows), 0);
  Matrix weights = Matrix::Zero(rows, 1);
  Index labeled = 0;
  for (Index i = 0; i < rows; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= probabilities.cols()) throw InvalidArgument("supervised_loss: label out of range");
    picked[static_cast<std::size_t>(i)] = y;
    weights(i, 0) = 1.0;
    ++labeled;
  }
  SupervisedLoss out;
  out.has_labeled = labeled > 0;
  if (labeled > 0) weights /= static_cast<double>(labeled);
  Var log_p = ad::log(ad::clamp_min(ad::pick(probabilities, picked), kProbabilityFloor));
  out.loss = ad::scale(ad::weighted_sum(log_p, weights), -1.0);
  return out;
}

}  // namespace disensemi
