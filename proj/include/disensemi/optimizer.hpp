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

#include <vector>

namespace disensemi {

/// Adam: per-parameter step sizes from bias-corrected first and second
/// moment estimates of the gradient.
class Adam {
 public:
  struct Options {
    double learning_rate = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam(std::vector<ad::Parameter*> params, Options options);

  void zero_grad();
  /// Applies one update from the gradients currently held by the parameters.
  void step();
  long steps_taken() const { return step_; }

 private:
  std::vector<ad::Parameter*> params_;
  std::vector<ad::Matrix> first_;
  std::vector<ad::Matrix> second_;
  Options options_;
  long step_ = 0;
};

}  // namespace disensemi
