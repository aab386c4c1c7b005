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

#include "disensemi/errors.hpp"
#include "disensemi/logging.hpp"
#include "disensemi/mi_estimators.hpp"

#include <cmath>

namespace disensemi {

namespace {
constexpr double kPriorFloor = 1e-7;
}

Var per_factor_alignment(Var supervised, Var unsupervised, Index factor, Index factors, const AlignmentOptions& opts) {
  if (supervised.rows() != unsupervised.rows() || supervised.cols() != unsupervised.cols()) {
    throw InvalidArgument("alignment: supervised and unsupervised representations differ in shape");
  }
  if (supervised.rows() < 2) throw InvalidArgument("alignment: batch needs at least 2 graphs");
  if (factors <= 0 || supervised.cols() % factors != 0 || factor < 0 || factor >= factors) {
    throw InvalidArgument("alignment: bad factor index");
  }
  const Index m = supervised.cols() / factors;
  Var sim = nce_scores(ad::cols(supervised, factor * m, m), ad::cols(unsupervised, factor * m, m), opts.temperature);
  const bool exclude = opts.denominator == Denominator::ExcludePositive;
  return ad::sub(ad::diagonal(sim), ad::logsumexp_rows(sim, exclude));
}

Var alignment_log_likelihood(Var supervised, Var unsupervised, Index factors, const AlignmentOptions& opts) {
  std::vector<Var> parts;
  parts.reserve(static_cast<std::size_t>(factors));
  for (Index k = 0; k < factors; ++k) parts.push_back(per_factor_alignment(supervised, unsupervised, k, factors, opts));
  return factors == 1 ? parts.front() : ad::hconcat(parts);
}

Matrix e_step(const Matrix& prior, const Matrix& log_likelihood) {
  if (prior.rows() != log_likelihood.rows() || prior.cols() != log_likelihood.cols()) {
    throw InvalidArgument("e_step: prior and likelihood shapes differ");
  }
  Matrix q(prior.rows(), prior.cols());
  for (Index i = 0; i < prior.rows(); ++i) {
    // Work in log space: log prior + log likelihood, then normalize.
    Eigen::RowVectorXd logits = prior.row(i).array().log() + log_likelihood.row(i).array();
    const double top = logits.maxCoeff();
    if (!std::isfinite(top)) throw std::logic_error("e_step: unnormalized posterior row is all zero");
    Eigen::RowVectorXd w = (logits.array() - top).exp();
    q.row(i) = w / w.sum();
  }
  return q;
}

Matrix e_step(const Matrix& supervised, const Matrix& unsupervised, const Matrix& prior, Index factors,
              const AlignmentOptions& opts) {
  ad::Tape tape;
  Var ll = alignment_log_likelihood(tape.constant(supervised), tape.constant(unsupervised), factors, opts);
  return e_step(prior, ll.value());
}

Var elbo(const Matrix& posterior, Var log_likelihood, Var prior, bool detach_prior) {
  const Index rows = posterior.rows();
  if (log_likelihood.rows() != rows || prior.rows() != rows || log_likelihood.cols() != posterior.cols() ||
      prior.cols() != posterior.cols()) {
    throw InvalidArgument("elbo: shape mismatch");
  }
  if ((prior.value().array() < kPriorFloor).any()) {
    warn_once("elbo_prior_floor", "factor prior below 1e-7 clamped in the ELBO KL term");
  }
  const Matrix weights = posterior / static_cast<double>(rows);
  double entropy_term = 0.0;  // sum q log q, constant w.r.t. parameters
  for (Index i = 0; i < posterior.size(); ++i) {
    const double q = posterior.data()[i];
    if (q > 0) entropy_term += q * std::log(q);
  }
  entropy_term /= static_cast<double>(rows);
  ad::Tape& tape = *log_likelihood.tape;
  Var prior_in = detach_prior ? tape.constant(prior.value()) : prior;
  Var log_prior = ad::log(ad::clamp_min(prior_in, kPriorFloor));
  Var expected = ad::weighted_sum(log_likelihood, weights);
  Var cross = ad::weighted_sum(log_prior, weights);
  return ad::add_scalar(ad::add(expected, cross), -entropy_term);
}

double elbo(const Matrix& posterior, const Matrix& log_likelihood, const Matrix& prior) {
  ad::Tape tape;
  return elbo(posterior, tape.constant(log_likelihood), tape.constant(prior)).scalar();
}

Matrix log_marginal(const Matrix& prior, const Matrix& log_likelihood) {
  Matrix out(prior.rows(), 1);
  for (Index i = 0; i < prior.rows(); ++i) {
    Eigen::RowVectorXd logits = prior.row(i).array().log() + log_likelihood.row(i).array();
    const double top = logits.maxCoeff();
    out(i, 0) = top + std::log((logits.array() - top).exp().sum());
  }
  return out;
}

}  // namespace disensemi
