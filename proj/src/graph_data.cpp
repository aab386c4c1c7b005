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

#include "disensemi/graph_data.hpp"

#include "disensemi/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string_view>

namespace disensemi {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void parse_fail(const fs::path& file, std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << file.string() << ":" << line << ": " << what;
  throw ParseError(msg.str());
}

long long to_integer(std::string_view field, const fs::path& file, std::size_t line) {
  long long v = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc() || ptr != end) {
    parse_fail(file, line, "expected integer, got '" + std::string(field) + "'");
  }
  return v;
}

double to_real(std::string_view field, const fs::path& file, std::size_t line) {
  // std::from_chars for double is not available on every toolchain we target.
  std::string s(field);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) parse_fail(file, line, "expected real number, got '" + s + "'");
  return v;
}

/// Non-empty lines of a file, with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> read_lines(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open required file " + file.string());
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!trim(line).empty()) lines.emplace_back(number, line);
  }
  return lines;
}

std::vector<long long> read_integer_column(const fs::path& file) {
  std::vector<long long> out;
  for (const auto& [number, line] : read_lines(file)) {
    const auto fields = split_fields(line);
    if (fields.size() != 1) parse_fail(file, number, "expected a single integer");
    out.push_back(to_integer(fields[0], file, number));
  }
  return out;
}

/// Maps each distinct value to its rank among the sorted distinct values.
std::map<long long, int> dense_codes(const std::vector<long long>& values) {
  std::map<long long, int> codes;
  for (long long v : values) codes.emplace(v, 0);
  int next = 0;
  for (auto& [value, code] : codes) code = next++;
  return codes;
}

}  // namespace

std::vector<Index> Graph::degrees() const {
  std::vector<Index> deg(static_cast<std::size_t>(node_count), 0);
  for (const Edge& e : edges) ++deg[static_cast<std::size_t>(e.src)];
  return deg;
}

void GraphDataset::validate() const {
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const Graph& graph = graphs[g];
    const std::string where = "graph " + std::to_string(g);
    if (graph.node_count <= 0) throw IntegrityError(where + ": no nodes");
    if (graph.features.rows() != graph.node_count) throw IntegrityError(where + ": feature rows != node count");
    if (graph.features.cols() != feature_dim) throw IntegrityError(where + ": feature width != dataset feature_dim");
    std::set<Edge> present(graph.edges.begin(), graph.edges.end());
    for (const Edge& e : graph.edges) {
      if (e.src < 0 || e.src >= graph.node_count || e.dst < 0 || e.dst >= graph.node_count) {
        throw IntegrityError(where + ": edge endpoint out of range");
      }
      if (!present.count(Edge{e.dst, e.src})) throw IntegrityError(where + ": edge without its reverse");
    }
    if (graph.label && (*graph.label < 0 || *graph.label >= num_classes)) {
      throw IntegrityError(where + ": label outside [0, num_classes)");
    }
  }
}

GraphDataset parse_tu_dataset(const fs::path& directory, const std::string& name) {
  const fs::path a_file = directory / (name + "_A.txt");
  const fs::path indicator_file = directory / (name + "_graph_indicator.txt");
  const fs::path labels_file = directory / (name + "_graph_labels.txt");
  const fs::path node_labels_file = directory / (name + "_node_labels.txt");
  const fs::path node_attr_file = directory / (name + "_node_attributes.txt");
  for (const fs::path& f : {a_file, indicator_file, labels_file}) {
    if (!fs::exists(f)) throw ParseError("missing required file " + f.string());
  }

  const std::vector<long long> indicator = read_integer_column(indicator_file);
  const std::vector<long long> raw_labels = read_integer_column(labels_file);
  const auto graph_count = static_cast<long long>(raw_labels.size());
  const auto total_nodes = static_cast<Index>(indicator.size());

  GraphDataset ds;
  ds.name = name;
  ds.graphs.resize(static_cast<std::size_t>(graph_count));

  // node id (0-based, global) -> (graph, local index)
  std::vector<std::pair<Index, Index>> locate(static_cast<std::size_t>(total_nodes));
  for (Index v = 0; v < total_nodes; ++v) {
    const long long gid = indicator[static_cast<std::size_t>(v)];
    if (gid < 1 || gid > graph_count) {
      throw IntegrityError(indicator_file.string() + ":" + std::to_string(v + 1) + ": graph id " +
                           std::to_string(gid) + " outside [1, " + std::to_string(graph_count) + "]");
    }
    Graph& g = ds.graphs[static_cast<std::size_t>(gid - 1)];
    locate[static_cast<std::size_t>(v)] = {gid - 1, g.node_count++};
  }
  for (long long g = 0; g < graph_count; ++g) {
    if (ds.graphs[static_cast<std::size_t>(g)].node_count == 0) {
      throw IntegrityError(indicator_file.string() + ": graph " + std::to_string(g + 1) + " has no nodes");
    }
  }

  for (const auto& [number, line] : read_lines(a_file)) {
    const auto fields = split_fields(line);
    if (fields.size() != 2) parse_fail(a_file, number, "expected 'row, col'");
    const long long u = to_integer(fields[0], a_file, number);
    const long long v = to_integer(fields[1], a_file, number);
    if (u < 1 || u > total_nodes || v < 1 || v > total_nodes) {
      throw IntegrityError(a_file.string() + ":" + std::to_string(number) + ": node id outside [1, " +
                           std::to_string(total_nodes) + "]");
    }
    const auto [gu, lu] = locate[static_cast<std::size_t>(u - 1)];
    const auto [gv, lv] = locate[static_cast<std::size_t>(v - 1)];
    if (gu != gv) {
      throw IntegrityError(a_file.string() + ":" + std::to_string(number) + ": edge joins graphs " +
                           std::to_string(gu + 1) + " and " + std::to_string(gv + 1));
    }
    auto& edges = ds.graphs[static_cast<std::size_t>(gu)].edges;
    edges.push_back({lu, lv});
    edges.push_back({lv, lu});
  }
  for (Graph& g : ds.graphs) {
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  }

  // Node features: one-hot node labels, then real attributes.
  std::vector<Matrix> blocks;
  if (fs::exists(node_labels_file)) {
    const auto lines = read_lines(node_labels_file);
    if (static_cast<Index>(lines.size()) != total_nodes) {
      throw IntegrityError(node_labels_file.string() + ": expected " + std::to_string(total_nodes) + " lines");
    }
    std::vector<std::vector<long long>> columns;
    for (const auto& [number, line] : lines) {
      const auto fields = split_fields(line);
      if (columns.empty()) columns.resize(fields.size());
      if (fields.size() != columns.size()) parse_fail(node_labels_file, number, "inconsistent column count");
      for (std::size_t c = 0; c < fields.size(); ++c) columns[c].push_back(to_integer(fields[c], node_labels_file, number));
    }
    for (const auto& column : columns) {
      const auto codes = dense_codes(column);
      Matrix onehot = Matrix::Zero(total_nodes, static_cast<Index>(codes.size()));
      for (Index v = 0; v < total_nodes; ++v) onehot(v, codes.at(column[static_cast<std::size_t>(v)])) = 1.0;
      blocks.push_back(std::move(onehot));
    }
  }
  if (fs::exists(node_attr_file)) {
    const auto lines = read_lines(node_attr_file);
    if (static_cast<Index>(lines.size()) != total_nodes) {
      throw IntegrityError(node_attr_file.string() + ": expected " + std::to_string(total_nodes) + " lines");
    }
    Matrix attrs;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto fields = split_fields(lines[i].second);
      if (i == 0) attrs.resize(total_nodes, static_cast<Index>(fields.size()));
      if (static_cast<Index>(fields.size()) != attrs.cols()) parse_fail(node_attr_file, lines[i].first, "inconsistent column count");
      for (std::size_t c = 0; c < fields.size(); ++c) {
        attrs(static_cast<Index>(i), static_cast<Index>(c)) = to_real(fields[c], node_attr_file, lines[i].first);
      }
    }
    blocks.push_back(std::move(attrs));
  }
  Index width = 0;
  for (const Matrix& b : blocks) width += b.cols();
  ds.feature_dim = width;
  for (Graph& g : ds.graphs) {
    g.features.resize(g.node_count, width);
    g.node_count = 0;  // reused as a fill cursor below
  }
  for (Index v = 0; v < total_nodes; ++v) {
    Graph& g = ds.graphs[static_cast<std::size_t>(locate[static_cast<std::size_t>(v)].first)];
    Index col = 0;
    for (const Matrix& b : blocks) {
      g.features.row(g.node_count).segment(col, b.cols()) = b.row(v);
      col += b.cols();
    }
    ++g.node_count;
  }

  const auto label_codes = dense_codes(raw_labels);
  ds.num_classes = static_cast<int>(label_codes.size());
  for (long long g = 0; g < graph_count; ++g) {
    ds.graphs[static_cast<std::size_t>(g)].label = label_codes.at(raw_labels[static_cast<std::size_t>(g)]);
  }
  return ds;
}

void write_tu_dataset(const GraphDataset& dataset, const fs::path& directory) {
  fs::create_directories(directory);
  const std::string& name = dataset.name;
  std::ofstream a(directory / (name + "_A.txt"));
  std::ofstream indicator(directory / (name + "_graph_indicator.txt"));
  std::ofstream labels(directory / (name + "_graph_labels.txt"));
  std::ofstream attrs;
  if (dataset.feature_dim > 0) {
    attrs.open(directory / (name + "_node_attributes.txt"));
    attrs.precision(17);
  }
  Index offset = 0;
  for (std::size_t g = 0; g < dataset.graphs.size(); ++g) {
    const Graph& graph = dataset.graphs[g];
    for (Index v = 0; v < graph.node_count; ++v) {
      indicator << (g + 1) << '\n';
      if (dataset.feature_dim > 0) {
        for (Index c = 0; c < graph.features.cols(); ++c) attrs << (c ? ", " : "") << graph.features(v, c);
        attrs << '\n';
      }
    }
    for (const Edge& e : graph.edges) a << (offset + e.src + 1) << ", " << (offset + e.dst + 1) << '\n';
    labels << graph.label.value_or(0) << '\n';
    offset += graph.node_count;
  }
  if (!a || !indicator || !labels) throw std::runtime_error("failed writing dataset to " + directory.string());
}

GraphDataset synthesize_degree_features(const GraphDataset& dataset, Index max_degree) {
  if (max_degree < 1) throw InvalidArgument("synthesize_degree_features: max_degree must be >= 1");
  GraphDataset out = dataset;
  out.feature_dim = max_degree + 1;
  for (Graph& g : out.graphs) {
    const auto deg = g.degrees();
    g.features = Matrix::Zero(g.node_count, max_degree + 1);
    for (Index v = 0; v < g.node_count; ++v) g.features(v, std::min(deg[static_cast<std::size_t>(v)], max_degree)) = 1.0;
  }
  return out;
}

Index default_max_degree(const GraphDataset& dataset) {
  Index best = 1;
  for (const Graph& g : dataset.graphs) {
    for (Index d : g.degrees()) best = std::max(best, d);
  }
  return std::min<Index>(best, 128);
}

SplitPlan make_splits(const GraphDataset& dataset, int fold_count, double label_ratio, std::uint64_t seed) {
  if (fold_count < 2) throw InvalidArgument("make_splits: fold_count must be >= 2");
  if (!(label_ratio > 0.0 && label_ratio <= 1.0)) throw InvalidArgument("make_splits: label_ratio must be in (0, 1]");
  const auto n = static_cast<Index>(dataset.size());
  if (fold_count > n) throw InvalidArgument("make_splits: more folds than graphs");

  std::mt19937_64 rng(seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);

  // Part sizes differ by at most one; the first n % fold_count parts are larger.
  std::vector<std::vector<Index>> parts(static_cast<std::size_t>(fold_count));
  const Index base = n / fold_count;
  const Index extra = n % fold_count;
  Index cursor = 0;
  for (Index p = 0; p < fold_count; ++p) {
    const Index len = base + (p < extra ? 1 : 0);
    parts[static_cast<std::size_t>(p)].assign(order.begin() + cursor, order.begin() + cursor + len);
    cursor += len;
  }

  SplitPlan plan;
  plan.fold_count = fold_count;
  plan.label_ratio = label_ratio;
  plan.seed = seed;
  for (int f = 0; f < fold_count; ++f) {
    Fold fold;
    // With two parts there is nothing left to train on after a validation
    // part, so validation stays empty.
    const int val = fold_count > 2 ? (f + 1) % fold_count : -1;
    fold.test = parts[static_cast<std::size_t>(f)];
    if (val >= 0) fold.validation = parts[static_cast<std::size_t>(val)];
    for (int p = 0; p < fold_count; ++p) {
      if (p == f || p == val) continue;
      fold.train.insert(fold.train.end(), parts[static_cast<std::size_t>(p)].begin(), parts[static_cast<std::size_t>(p)].end());
    }
    const auto labeled = static_cast<std::size_t>(std::llround(label_ratio * static_cast<double>(fold.train.size())));
    std::vector<Index> pool = fold.train;
    std::shuffle(pool.begin(), pool.end(), rng);
    fold.labeled_train.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(labeled));
    std::sort(fold.labeled_train.begin(), fold.labeled_train.end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

Batch batch_graphs(const std::vector<std::pair<const Graph*, Index>>& graphs, const std::vector<bool>& labeled_mask) {
  if (graphs.empty()) throw InvalidArgument("batch_graphs: empty graph list");
  if (labeled_mask.size() != graphs.size()) throw InvalidArgument("batch_graphs: labeled_mask size mismatch");
  Batch b;
  Index total_nodes = 0;
  Index total_edges = 0;
  const Index width = graphs.front().first->features.cols();
  for (const auto& [g, idx] : graphs) {
    if (g->features.cols() != width) throw InvalidArgument("batch_graphs: feature width differs between graphs");
    total_nodes += g->node_count;
    total_edges += static_cast<Index>(g->edges.size());
  }
  b.features.resize(total_nodes, width);
  b.edge_src.reserve(static_cast<std::size_t>(total_edges));
  b.edge_dst.reserve(static_cast<std::size_t>(total_edges));
  b.graph_ids.reserve(static_cast<std::size_t>(total_nodes));
  b.node_offsets.push_back(0);
  std::set<Index> seen;
  Index offset = 0;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const Graph& g = *graphs[i].first;
    if (!seen.insert(graphs[i].second).second) throw InvalidArgument("batch_graphs: duplicate surrogate label");
    if (g.node_count > 0) b.features.middleRows(offset, g.node_count) = g.features;
    for (const Edge& e : g.edges) {
      b.edge_src.push_back(offset + e.src);
      b.edge_dst.push_back(offset + e.dst);
    }
    for (Index v = 0; v < g.node_count; ++v) b.graph_ids.push_back(static_cast<Index>(i));
    offset += g.node_count;
    b.node_offsets.push_back(offset);
    b.surrogate_labels.push_back(graphs[i].second);
    b.labels.push_back(g.label.value_or(-1));
    b.labeled_mask.push_back(labeled_mask[i] && g.label.has_value());
  }
  return b;
}

Batch batch_indices(const GraphDataset& dataset, const std::vector<Index>& indices, const std::vector<bool>& labeled_mask) {
  std::vector<std::pair<const Graph*, Index>> items;
  items.reserve(indices.size());
  for (Index i : indices) items.emplace_back(&dataset.graphs.at(static_cast<std::size_t>(i)), i);
  return batch_graphs(items, labeled_mask);
}

}  // namespace disensemi
