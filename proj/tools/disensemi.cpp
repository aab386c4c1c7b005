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

// Command-line entry point: `disensemi train ...`.

#include "disensemi/checkpoint.hpp"
#include "disensemi/errors.hpp"
#include "disensemi/runtime.hpp"
#include "disensemi/trainer.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <map>

namespace {

using disensemi::TrainConfig;

// Long option name -> help text. Values are kept as strings and applied
// through TrainConfig::set so the CLI and config files share one parser.
const std::vector<std::pair<std::string, std::string>> kOptions = {
    {"dataset", "TU dataset name (directory under --data-dir)"},
    {"data-dir", "directory holding TU dataset folders"},
    {"k", "number of latent factors"},
    {"layers", "message passing layers"},
    {"dim", "embedding size, divisible by k"},
    {"lambda", "weight of the unsupervised MI loss"},
    {"gamma", "weight of the consistency ELBO"},
    {"lr", "learning rate"},
    {"epochs", "training epochs per fold"},
    {"label-ratio", "fraction of the training split with visible labels"},
    {"folds", "cross-validation folds"},
    {"repeats", "repeated cross-validation runs"},
    {"seed", "random seed"},
    {"ablation", "none|no-intra|no-inter|no-mi|no-consistency|uniform-prior|random-prior"},
    {"out", "output directory"},
    {"temperature", "alignment temperature"},
    {"batch-labeled", "labeled graphs per step"},
    {"batch-unlabeled", "unlabeled graphs per step"},
    {"inclusive-denominator", "keep the positive pair in the alignment denominator (true/false)"},
    {"detach-prior", "block KL gradients into the attention prior (true/false)"},
    {"classifier-hidden", "classifier hidden width (0: dim/k)"},
    {"scorer-hidden", "edge scorer hidden width (0: dim)"},
    {"max-degree", "degree one-hot cap (0: dataset maximum, at most 128)"},
    {"degree-features", "replace node features by one-hot degree (true/false)"},
    {"threads", "folds trained in parallel"},
};

int run_train(const std::string& config_file, const std::map<std::string, std::string>& overrides, bool save_models) {
  TrainConfig config;
  if (!config_file.empty()) config = disensemi::load_config_file(config_file, config);
  for (const auto& [key, value] : overrides) config.set(key, value);
  if (config.out_dir.empty()) config.out_dir = "runs/" + config.dataset;
  config.validate();

  const disensemi::GraphDataset dataset = disensemi::load_dataset(config);
  spdlog::info("{}: {} graphs, {} classes, {} input features", dataset.name, dataset.size(), dataset.num_classes,
               dataset.feature_dim);
  std::filesystem::create_directories(config.out_dir);

  auto on_fold = [&](const disensemi::FoldResult& r, disensemi::Model& model, const disensemi::SplitPlan& plan) {
    const auto dir = config.out_dir / ("repeat" + std::to_string(r.repeat) + "_fold" + std::to_string(r.fold));
    disensemi::export_artifacts(model, dataset, plan.folds[static_cast<std::size_t>(r.fold)].test, dir);
    if (save_models) disensemi::save_checkpoint(std::as_const(model).parameters(), dir / "model.ckpt");
  };
  disensemi::MetricsRecord metrics = disensemi::run_cv(config, dataset, on_fold);

  nlohmann::json out = metrics.to_json();
  out["config"] = config.to_json();
  out["dataset_summary"] = {{"graphs", dataset.size()}, {"classes", dataset.num_classes}, {"feature_dim", dataset.feature_dim}};
  std::ofstream(config.out_dir / "metrics.json") << out.dump(2) << '\n';
  disensemi::write_history_csv(metrics, config.out_dir / "history.csv");
  std::cout << "mean accuracy " << metrics.mean_accuracy << " (std over folds " << metrics.std_over_folds
            << ", std over repeats " << metrics.std_over_repeats << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  disensemi::tune_allocator();
  CLI::App app{"Disentangled semi-supervised graph classification"};
  app.require_subcommand(1);
  CLI::App* train = app.add_subcommand("train", "run repeated k-fold cross-validation");

  std::string config_file;
  bool save_models = false;
  train->add_option("--config", config_file, "flat key=value config file; flags override it")->check(CLI::ExistingFile);
  train->add_flag("--save-models", save_models, "write the selected model of each fold");
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> opts;
  for (const auto& [name, help] : kOptions) {
    opts.emplace_back(name, train->add_option("--" + name, values[name], help));
  }

  CLI11_PARSE(app, argc, argv);

  std::map<std::string, std::string> overrides;
  for (const auto& [name, opt] : opts) {
    if (opt->count() > 0) overrides[name] = values[name];
  }
  try {
    return run_train(config_file, overrides, save_models);
  } catch (const disensemi::ParseError& e) {
    spdlog::error("parse error: {}", e.what());
    return 2;
  } catch (const disensemi::IntegrityError& e) {
    spdlog::error("dataset integrity error: {}", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    spdlog::error("invalid argument: {}", e.what());
    return 2;
  } catch (const disensemi::DivergenceError& e) {
    spdlog::error("training diverged: {}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
