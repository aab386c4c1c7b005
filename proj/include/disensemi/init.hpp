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

#include "disensemi/autodiff.hpp"

#include <cmath>
#include <random>

namespace disensemi {

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)); shape fan_in x fan_out.
inline ad::Matrix glorot_uniform(ad::Index fan_in, ad::Index fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  ad::Matrix m(fan_in, fan_out);
  for (ad::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

/// Rows drawn from a standard normal and scaled to unit length.
inline ad::Matrix unit_rows(ad::Index rows, ad::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  ad::Matrix m(rows, cols);
  for (ad::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  for (ad::Index i = 0; i < rows; ++i) m.row(i).normalize();
  return m;
}

}  // namespace disensemi
