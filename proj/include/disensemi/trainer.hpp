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

// Semi-supervised training with the combined objective
//   L_total = L_S + lambda * L_U - gamma * ELBO,
// k-fold cross-validation with repeats, and analysis exports.

#include "disensemi/consistency.hpp"
#include "disensemi/encoder.hpp"
#include "disensemi/graph_data.hpp"
#include "disensemi/mi_estimators.hpp"
#include "disensemi/supervised_head.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace disensemi {

enum class Ablation {
  None,
  NoIntra,         // L_U = L_inter
  NoInter,         // L_U = sum_k L_intra^k
  NoMI,            // no L_U
  NoConsistency,   // no ELBO term
  UniformPrior,    // p(k|G) = 1/K in the consistency term
  RandomPrior,     // p(k|G) one-hot on a uniformly drawn factor
};

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& s);

struct TrainConfig {
  std::string dataset = "MUTAG";
  std::filesystem::path data_dir = "data";
  Index factors = 4;
  Index dim = 128;
  Index layers = 3;
  double lambda = 0.001;
  double gamma = 0.001;
  double learning_rate = 0.005;
  int epochs = 200;
  Index labeled_batch = 32;
  Index unlabeled_batch = 96;
  double label_ratio = 0.3;
  int folds = 10;
  int repeats = 10;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  Ablation ablation = Ablation::None;
  /// Include the positive pair in the alignment denominator.
  bool inclusive_denominator = false;
  /// Stop the KL term's gradient from reaching the attention prior.
  bool detach_prior = false;
  Index classifier_hidden = 0;  // 0: d/K
  Index scorer_hidden = 0;      // 0: d
  /// One-hot degree cap for featureless datasets; 0 picks the dataset maximum (capped at 128).
  Index max_degree = 0;
  bool degree_features = false;  // replace node features by one-hot degree
  int threads = 1;
  std::filesystem::path out_dir;

  void validate() const;
  /// Applies one `key=value` setting; keys match the CLI long option names.
  void set(const std::string& key, const std::string& value);
  nlohmann::json to_json() const;
};

/// Reads a flat key=value file; blank lines and '#' comments are ignored.
TrainConfig load_config_file(const std::filesystem::path& file, TrainConfig base = {});

/// Parses the configured dataset and synthesizes degree features when it has none.
GraphDataset load_dataset(const TrainConfig& config);

/// Both encoders, the supervised head and the critics.
struct Model {
  EncoderParams supervised_encoder;
  EncoderParams unsupervised_encoder;
  SupervisedHeadParams head;
  Discriminator discriminator;

  static Model initialize(const TrainConfig& config, Index input_dim, int classes, std::mt19937_64& rng);
  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
};

struct StepLosses {
  double supervised = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  double unsupervised = 0.0;  // the L_U actually optimized under the ablation
  double elbo = 0.0;
  double total = 0.0;
  double lambda = 0.0;  // effective weights after ablation
  double gamma = 0.0;
  bool has_labeled = false;
};

/// Forward pass of the full objective on one batch; with `backward` the
/// gradients are accumulated into the model parameters.
StepLosses training_step(Model& model, const Batch& batch, const TrainConfig& config, std::mt19937_64& rng,
                         bool backward);

struct EpochLog {
  int epoch = 0;
  double supervised = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  double unsupervised = 0.0;
  double elbo = 0.0;
  double total = 0.0;
  double validation_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct FoldResult {
  int repeat = 0;
  int fold = 0;
  double test_accuracy = 0.0;
  double validation_accuracy = 0.0;
  int best_epoch = -1;
  double seconds = 0.0;
  std::vector<EpochLog> history;
};

struct FoldOutcome {
  FoldResult result;
  Model model;  // parameters at the selected epoch
};

FoldOutcome train_fold(const TrainConfig& config, const GraphDataset& dataset, const Fold& fold, int fold_index,
                       int repeat);

/// Predicted class per graph from the supervised branch.
std::vector<int> predict_labels(Model& model, const GraphDataset& dataset, const std::vector<Index>& indices);

/// Fraction of graphs whose predicted class equals their label.
double evaluate(Model& model, const GraphDataset& dataset, const std::vector<Index>& indices);

struct MetricsRecord {
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  /// Standard deviation over every (repeat, fold) accuracy.
  double std_over_folds = 0.0;
  /// Standard deviation of the per-repeat means (zero with a single repeat).
  double std_over_repeats = 0.0;
  double mean_validation_accuracy = 0.0;
  std::vector<double> repeat_means;

  void aggregate();
  nlohmann::json to_json() const;
};

/// Called after each fold finishes, with the trained model.
using FoldCallback = std::function<void(const FoldResult&, Model&, const SplitPlan&)>;

MetricsRecord run_cv(const TrainConfig& config, const GraphDataset& dataset, const FoldCallback& on_fold = {});

/// Absolute Pearson correlation between representation dimensions (columns).
/// Constant columns correlate 0 with everything else; the diagonal is 1.
Matrix absolute_correlation(const Matrix& samples);

struct BlockCorrelation {
  double within = 0.0;  // mean |corr| over off-diagonal pairs inside a factor block
  double across = 0.0;  // mean |corr| over pairs from different blocks
};

BlockCorrelation block_correlation(const Matrix& abs_correlation, Index factors);

/// Supervised representations (graphs x d) of the given graphs.
Matrix supervised_representations(Model& model, const GraphDataset& dataset, const std::vector<Index>& indices);

/// Writes correlation.csv, coefficients.csv and attention.csv for `indices`.
void export_artifacts(Model& model, const GraphDataset& dataset, const std::vector<Index>& indices,
                      const std::filesystem::path& out_dir);

void write_history_csv(const MetricsRecord& metrics, const std::filesystem::path& file);

}  // namespace disensemi
