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

#include "disensemi/encoder.hpp"
#include "disensemi/errors.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <numeric>

using namespace disensemi;
using ad::Tape;

namespace {

EncoderParams make_encoder(Index input_dim, Index dim, Index factors, Index layers, std::uint64_t seed) {
  EncoderConfig c;
  c.input_dim = input_dim;
  c.dim = dim;
  c.factors = factors;
  c.layers = layers;
  std::mt19937_64 rng(seed);
  return EncoderParams::initialize(c, rng);
}

Matrix encode_values(EncoderParams& p, const Batch& b) {
  Tape t;
  return encode(b, bind(t, p)).representations.value();
}

Matrix coefficients_of(EncoderParams& p, const Batch& b) {
  Tape t;
  return encode(b, bind(t, p)).coefficients.value();
}

}  // namespace

TEST_CASE("config validation") {
  EncoderConfig c;
  c.input_dim = 3;
  c.dim = 10;
  c.factors = 4;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.dim = 8;
  c.layers = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.layers = 2;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("zero scorer output gives uniform coefficients") {
  EncoderParams p = make_encoder(3, 8, 4, 2, 1);
  for (auto& w : p.scorer_out) w.value.setZero();
  p.scorer_out_bias.value.setZero();
  std::mt19937_64 rng(0);
  Graph g = testutil::random_graph(5, 3, rng);
  Batch b = batch_graphs({{&g, 0}}, {false});
  Matrix c = coefficients_of(p, b);
  CHECK(c.rows() == static_cast<Index>(g.edges.size()));
  CHECK(c.isApprox(Matrix::Constant(c.rows(), 4, 0.25)));
}

TEST_CASE("one factor gives coefficient exactly one") {
  EncoderParams p = make_encoder(3, 8, 1, 2, 2);
  std::mt19937_64 rng(1);
  Graph g = testutil::random_graph(6, 3, rng);
  Batch b = batch_graphs({{&g, 0}}, {false});
  Matrix c = coefficients_of(p, b);
  for (Index i = 0; i < c.size(); ++i) CHECK(c.data()[i] == 1.0);
}

TEST_CASE("raw scores sigma(1) and sigma(-1) normalize to themselves") {
  EncoderParams p = make_encoder(2, 4, 2, 1, 3);
  for (auto& w : p.scorer_out) w.value.setZero();
  p.scorer_out_bias.value << 1.0, -1.0;
  Graph g = testutil::make_graph(2, {{0, 1}}, Matrix::Ones(2, 2));
  Batch b = batch_graphs({{&g, 0}}, {false});
  Matrix c = coefficients_of(p, b);
  const double s1 = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(c(0, 0) == doctest::Approx(s1));
  CHECK(c(0, 1) == doctest::Approx(1.0 - s1));
  CHECK(c(0, 0) == doctest::Approx(0.7311).epsilon(1e-4));
}

TEST_CASE("coefficient rows sum to one with entries in (0,1)") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    EncoderParams p = make_encoder(3, 12, 3, 2, static_cast<std::uint64_t>(trial));
    Graph g = testutil::random_graph(7, 3, rng);
    Matrix c = coefficients_of(p, batch_graphs({{&g, 0}}, {false}));
    for (Index e = 0; e < c.rows(); ++e) {
      CHECK(c.row(e).sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(c.row(e).minCoeff() > 0.0);
      CHECK(c.row(e).maxCoeff() < 1.0);
    }
  }
}

TEST_CASE("path graph single layer with identity weights") {
  EncoderParams p = make_encoder(1, 1, 1, 1, 5);
  p.factor_input.value.setOnes();
  p.layers[0].self_weights[0].value.setOnes();
  p.layers[0].neighbor_weights[0].value.setOnes();
  Matrix x(3, 1);
  x << 1, 2, 3;
  Graph g = testutil::make_graph(3, {{0, 1}, {1, 2}}, x);
  Batch b = batch_graphs({{&g, 0}}, {false});
  Tape t;
  EncoderVars v = bind(t, p);
  Var feats = t.constant(b.features);
  Var coeffs = t.constant(Matrix::Ones(b.edge_count(), 1));
  Matrix h = message_passing(b, feats, coeffs, v).value();
  CHECK(h(0, 0) == doctest::Approx(3.0));
  CHECK(h(1, 0) == doctest::Approx(6.0));
  CHECK(h(2, 0) == doctest::Approx(5.0));
}

TEST_CASE("identity self weights and zero neighbor weights keep the input transform") {
  EncoderParams p = make_encoder(3, 4, 2, 3, 6);
  for (auto& layer : p.layers) {
    for (auto& w : layer.self_weights) w.value.setIdentity();
    for (auto& w : layer.neighbor_weights) w.value.setZero();
  }
  // with positive inputs ReLU is the identity as well
  p.factor_input.value = p.factor_input.value.cwiseAbs();
  std::mt19937_64 rng(2);
  Graph g = testutil::random_graph(5, 3, rng);
  g.features = g.features.cwiseAbs();
  Batch b = batch_graphs({{&g, 0}}, {false});
  Tape t;
  EncoderVars v = bind(t, p);
  Var feats = t.constant(b.features);
  Matrix h = message_passing(b, feats, compute_factor_coefficients(b, feats, v), v).value();
  CHECK(h.isApprox(b.features * p.factor_input.value));
}

TEST_CASE("isolated node sees only the self transform chain") {
  EncoderParams p = make_encoder(2, 4, 2, 2, 7);
  Matrix x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  Graph g = testutil::make_graph(3, {{0, 1}}, x);
  Batch b = batch_graphs({{&g, 0}}, {false});
  Tape t;
  EncoderVars v = bind(t, p);
  Var feats = t.constant(b.features);
  Matrix h = message_passing(b, feats, compute_factor_coefficients(b, feats, v), v).value();
  // hand chain for node 2, factor by factor
  Matrix h0 = x.row(2) * p.factor_input.value;
  for (Index k = 0; k < 2; ++k) {
    Matrix z = h0.middleCols(k * 2, 2);
    z = (z * p.layers[0].self_weights[static_cast<std::size_t>(k)].value).cwiseMax(0.0);
    z = z * p.layers[1].self_weights[static_cast<std::size_t>(k)].value;
    CHECK(h.row(2).segment(k * 2, 2).isApprox(z.row(0)));
  }
}

TEST_CASE("edgeless graph encodes with self terms only") {
  EncoderParams p = make_encoder(2, 4, 2, 2, 8);
  Graph g = testutil::make_graph(2, {}, Matrix::Ones(2, 2));
  Batch b = batch_graphs({{&g, 0}}, {false});
  Tape t;
  EncodeResult r = encode(b, bind(t, p));
  CHECK(r.coefficients.rows() == 0);
  CHECK(r.representations.value().allFinite());
}

TEST_CASE("readout is the per-graph mean") {
  Graph a = testutil::make_graph(2, {{0, 1}}, Matrix::Zero(2, 1));
  Graph c = testutil::make_graph(1, {}, Matrix::Zero(1, 1));
  Batch b = batch_graphs({{&a, 0}, {&c, 1}}, {false, false});
  Tape t;
  Matrix h(3, 2);
  h << 1, 0, 0, 1, 4, 4;
  Matrix z = readout(t.constant(h), b).value();
  CHECK(z(0, 0) == doctest::Approx(0.5));
  CHECK(z(0, 1) == doctest::Approx(0.5));
  CHECK(z(1, 0) == doctest::Approx(4.0));
}

TEST_CASE("MUTAG batch with d=128 and K=4 gives 4 x 32 factor matrices") {
  GraphDataset ds = parse_tu_dataset(testutil::data_dir() / "MUTAG", "MUTAG");
  EncoderParams p = make_encoder(ds.feature_dim, 128, 4, 3, 9);
  Batch b = batch_indices(ds, {0, 1, 2, 3, 4}, std::vector<bool>(5, false));
  Matrix reps = encode_values(p, b);
  CHECK(reps.rows() == 5);
  CHECK(reps.cols() == 128);
  auto zs = factor_matrices(reps, 4);
  REQUIRE(zs.size() == 5);
  CHECK(zs[0].rows() == 4);
  CHECK(zs[0].cols() == 32);
  CHECK(zs[3].row(2) == reps.row(3).segment(64, 32));
}

TEST_CASE("duplicated graph gives identical rows and batching does not couple graphs") {
  std::mt19937_64 rng(10);
  EncoderParams p = make_encoder(3, 8, 2, 3, 11);
  Graph a = testutil::random_graph(6, 3, rng);
  Graph c = testutil::random_graph(4, 3, rng);
  Matrix both = encode_values(p, batch_graphs({{&a, 0}, {&c, 1}, {&a, 2}}, {false, false, false}));
  CHECK((both.row(0) - both.row(2)).cwiseAbs().maxCoeff() < 1e-12);
  Matrix alone = encode_values(p, batch_graphs({{&c, 1}}, {false}));
  CHECK((both.row(1) - alone.row(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("representations are invariant to node relabeling") {
  std::mt19937_64 rng(12);
  EncoderParams p = make_encoder(3, 8, 2, 2, 13);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g = testutil::random_graph(7, 3, rng);
    std::vector<Index> perm(7);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Graph h = testutil::permute_graph(g, perm);
    Matrix zg = encode_values(p, batch_graphs({{&g, 0}}, {false}));
    Matrix zh = encode_values(p, batch_graphs({{&h, 0}}, {false}));
    CHECK((zg - zh).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("one factor reduces to a single-channel GraphConv stack with mean readout") {
  EncoderParams p = make_encoder(2, 3, 1, 2, 14);
  std::mt19937_64 rng(15);
  Graph g = testutil::random_graph(5, 2, rng);
  Matrix z = encode_values(p, batch_graphs({{&g, 0}}, {false}));
  // plain dense reference: adjacency matrix times h
  Matrix adj = Matrix::Zero(5, 5);
  for (const auto& e : g.edges) adj(e.dst, e.src) += 1.0;
  Matrix h = g.features * p.factor_input.value;
  h = (h * p.layers[0].self_weights[0].value + adj * h * p.layers[0].neighbor_weights[0].value).cwiseMax(0.0);
  h = h * p.layers[1].self_weights[0].value + adj * h * p.layers[1].neighbor_weights[0].value;
  CHECK(z.row(0).isApprox(h.colwise().mean()));
}

TEST_CASE("encoder gradients match central differences on a 5-node graph") {
  EncoderParams p = make_encoder(3, 8, 2, 2, 16);
  std::mt19937_64 rng(17);
  Graph g = testutil::random_graph(5, 3, rng, 0.4);
  Batch b = batch_graphs({{&g, 0}}, {false});
  const Matrix w = testutil::random_matrix(1, 8, rng);
  auto loss = [&](bool backward) {
    Tape t;
    Var l = ad::weighted_sum(encode(b, bind(t, p)).representations, w);
    if (backward) t.backward(l);
    return l.scalar();
  };
  auto bad = testutil::gradient_check(p.parameters(), loss);
  for (const auto& m : bad) INFO(m.parameter << "[" << m.entry << "] " << m.analytic << " vs " << m.numeric);
  CHECK(bad.empty());
}

TEST_CASE("feature width mismatch is rejected") {
  EncoderParams p = make_encoder(3, 8, 2, 2, 18);
  Graph g = testutil::make_graph(2, {{0, 1}}, Matrix::Ones(2, 4));
  Batch b = batch_graphs({{&g, 0}}, {false});
  Tape t;
  CHECK_THROWS_AS(encode(b, bind(t, p)), std::invalid_argument);
}
