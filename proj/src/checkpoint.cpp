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

#include "disensemi/checkpoint.hpp"

#include "disensemi/errors.hpp"

#include <fstream>
#include <map>

namespace disensemi {

namespace {
constexpr const char* kMagic = "disensemi-checkpoint";
constexpr int kVersion = 1;
}  // namespace

void save_checkpoint(const std::vector<const ad::Parameter*>& params, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write checkpoint " + file.string());
  out.precision(17);
  out << kMagic << ' ' << kVersion << '\n';
  for (const ad::Parameter* p : params) {
    out << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << '\n';
    for (ad::Index i = 0; i < p->value.size(); ++i) out << (i ? " " : "") << p->value.data()[i];
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + file.string());
}

void load_checkpoint(const std::vector<ad::Parameter*>& params, const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open checkpoint " + file.string());
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic || version != kVersion) {
    throw ParseError(file.string() + ": not a version " + std::to_string(kVersion) + " checkpoint");
  }
  std::map<std::string, ad::Matrix> records;
  std::string name;
  ad::Index rows = 0;
  ad::Index cols = 0;
  while (in >> name >> rows >> cols) {
    ad::Matrix m(rows, cols);
    for (ad::Index i = 0; i < m.size(); ++i) {
      if (!(in >> m.data()[i])) throw ParseError(file.string() + ": truncated values for " + name);
    }
    records[name] = std::move(m);
  }
  for (ad::Parameter* p : params) {
    auto it = records.find(p->name);
    if (it == records.end()) throw ParseError(file.string() + ": missing parameter " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw ParseError(file.string() + ": shape mismatch for " + p->name);
    }
    p->value = it->second;
    p->zero_grad();
  }
}

}  // namespace disensemi
