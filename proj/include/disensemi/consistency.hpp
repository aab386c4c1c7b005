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

// Factor-wise consistency between the supervised and unsupervised encoders,
// trained as variational EM over the latent factor of each graph.
//
// Each graph's surrogate label is its dataset index. Under factor k, the
// likelihood of recovering that label is an NT-Xent score over the batch.
// The E-step forms the posterior over factors from the attention prior and
// those likelihoods. The M-step maximizes the ELBO with that posterior frozen.

#include "disensemi/autodiff.hpp"

namespace disensemi {

using ad::Index;
using ad::Matrix;
using ad::Var;

enum class Denominator {
  /// Sum over j != i (the positive pair is excluded).
  ExcludePositive,
  /// Sum over every j in the batch, the conventional NT-Xent form.
  IncludePositive,
};

struct AlignmentOptions {
  double temperature = 1.0;
  Denominator denominator = Denominator::ExcludePositive;
};

/// log p~(s_i | G_i, k) for one factor k, batch x 1.
Var per_factor_alignment(Var supervised, Var unsupervised, Index factor, Index factors, const AlignmentOptions& opts = {});

/// log p~ for all factors, batch x K.
Var alignment_log_likelihood(Var supervised, Var unsupervised, Index factors, const AlignmentOptions& opts = {});

/// Posterior q(k | G_i, s_i) proportional to prior(i, k) * exp(log_likelihood(i, k)).
/// Plain values: no gradient flows through q.
Matrix e_step(const Matrix& prior, const Matrix& log_likelihood);

/// Convenience overload evaluating the likelihoods from representations.
Matrix e_step(const Matrix& supervised, const Matrix& unsupervised, const Matrix& prior, Index factors,
              const AlignmentOptions& opts = {});

/// Batch mean of sum_k q (log p~ - log q + log prior). Priors are floored at 1e-7.
/// With detach_prior the KL term does not propagate into the prior.
Var elbo(const Matrix& posterior, Var log_likelihood, Var prior, bool detach_prior = false);

/// Scalar ELBO for plain inputs.
double elbo(const Matrix& posterior, const Matrix& log_likelihood, const Matrix& prior);

/// log sum_k prior_k exp(log_likelihood_k) per row, the quantity the ELBO bounds.
Matrix log_marginal(const Matrix& prior, const Matrix& log_likelihood);

}  // namespace disensemi
