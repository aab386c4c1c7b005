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

// Text checkpoints. The file starts with the line "disensemi-checkpoint 1",
// then one record per parameter:
//
//   <name> <rows> <cols>
//   <rows*cols values, row-major, whitespace separated>
//
// Values are written with 17 significant digits so a save/load round trip
// reproduces every double exactly.

#include "disensemi/autodiff.hpp"

#include <filesystem>
#include <vector>

namespace disensemi {

void save_checkpoint(const std::vector<const ad::Parameter*>& params, const std::filesystem::path& file);

/// Loads values by name into `params`; names and shapes must match exactly.
void load_checkpoint(const std::vector<ad::Parameter*>& params, const std::filesystem::path& file);

}  // namespace disensemi
