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

#include "disensemi/optimizer.hpp"

#include <cmath>

namespace disensemi {

Adam::Adam(std::vector<ad::Parameter*> params, Options options) : params_(std::move(params)), options_(options) {
  for (const ad::Parameter* p : params_) {
    first_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
    second_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::zero_grad() {
  for (ad::Parameter* p : params_) p->zero_grad();
}

void Adam::step() {
  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = options_.learning_rate;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::Parameter& p = *params_[i];
    if (p.grad.size() != p.value.size()) continue;
    first_[i] = b1 * first_[i] + (1.0 - b1) * p.grad;
    second_[i] = b2 * second_[i] + (1.0 - b2) * p.grad.cwiseAbs2();
    const auto m_hat = first_[i].array() / correction1;
    const auto v_hat = second_[i].array() / correction2;
    p.value.array() -= lr * m_hat / (v_hat.sqrt() + options_.epsilon);
  }
}

}  // namespace disensemi
