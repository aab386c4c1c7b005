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

// Graph datasets in the TU benchmark text format, cross-validation splits
// with partial labeling, and disjoint-union minibatching.

#include "disensemi/autodiff.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace disensemi {

using ad::Index;
using ad::Matrix;

struct Edge {
  Index src = 0;
  Index dst = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Undirected graph stored as a symmetric list of directed edges.
struct Graph {
  Index node_count = 0;
  std::vector<Edge> edges;
  Matrix features;  // node_count x feature_dim
  std::optional<int> label;

  /// Number of stored edges leaving each node.
  std::vector<Index> degrees() const;
};

struct GraphDataset {
  std::string name;
  std::vector<Graph> graphs;
  int num_classes = 0;
  Index feature_dim = 0;

  std::size_t size() const { return graphs.size(); }
  /// Checks edge bounds, symmetry, feature shapes and labels; throws IntegrityError.
  void validate() const;
};

/// Disjoint union of several graphs.
struct Batch {
  Matrix features;                    // total_nodes x feature_dim
  ad::IndexVector edge_src;           // merged, offset node indices
  ad::IndexVector edge_dst;
  ad::IndexVector graph_ids;          // per node, nondecreasing
  std::vector<Index> node_offsets;    // graph_count + 1 entries
  std::vector<Index> surrogate_labels;  // dataset index per graph
  std::vector<int> labels;            // per graph, -1 when unknown
  std::vector<bool> labeled_mask;

  Index graph_count() const { return static_cast<Index>(surrogate_labels.size()); }
  Index node_count() const { return features.rows(); }
  Index edge_count() const { return static_cast<Index>(edge_src.size()); }
  Index nodes_in(Index g) const { return node_offsets[g + 1] - node_offsets[g]; }
};

struct Fold {
  std::vector<Index> test;
  std::vector<Index> validation;
  std::vector<Index> train;
  std::vector<Index> labeled_train;
};

struct SplitPlan {
  int fold_count = 10;
  double label_ratio = 0.3;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;
};

/// Reads `<name>_A.txt`, `<name>_graph_indicator.txt`, `<name>_graph_labels.txt`
/// and the optional node label / attribute files from `directory`.
GraphDataset parse_tu_dataset(const std::filesystem::path& directory, const std::string& name);

/// Writes the dataset back in TU format. Features go to node_attributes.
void write_tu_dataset(const GraphDataset& dataset, const std::filesystem::path& directory);

/// Replaces node features by one-hot(min(degree, max_degree)).
GraphDataset synthesize_degree_features(const GraphDataset& dataset, Index max_degree);

/// Largest node degree in the dataset, capped at 128.
Index default_max_degree(const GraphDataset& dataset);

SplitPlan make_splits(const GraphDataset& dataset, int fold_count, double label_ratio, std::uint64_t seed);

/// Merges graphs into one disjoint graph. Each entry pairs a graph with its
/// dataset index, which becomes the surrogate label.
Batch batch_graphs(const std::vector<std::pair<const Graph*, Index>>& graphs, const std::vector<bool>& labeled_mask);

/// Convenience: batch dataset graphs by index.
Batch batch_indices(const GraphDataset& dataset, const std::vector<Index>& indices, const std::vector<bool>& labeled_mask);

}  // namespace disensemi
