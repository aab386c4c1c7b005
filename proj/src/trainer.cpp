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

#include "disensemi/trainer.hpp"

#include "disensemi/errors.hpp"
#include "disensemi/optimizer.hpp"
#include "disensemi/unsup_objective.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

namespace disensemi {

namespace {

constexpr Index kEvalChunk = 256;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct SupervisedForward {
  Var representations;
  Var attention;
  Var probabilities;
  Var coefficients;
};

SupervisedForward supervised_forward(ad::Tape& tape, Model& model, const Batch& batch) {
  EncoderVars enc = bind(tape, model.supervised_encoder);
  HeadVars head = bind(tape, model.head);
  EncodeResult r = encode(batch, enc);
  SupervisedForward f;
  f.representations = r.representations;
  f.coefficients = r.coefficients;
  f.attention = factor_attention(r.representations, head.prototypes, model.head.config.factors);
  f.probabilities = predict(r.representations, f.attention, head);
  return f;
}

template <typename Fn>
void for_each_chunk(const std::vector<Index>& indices, Fn&& fn) {
  for (std::size_t start = 0; start < indices.size(); start += kEvalChunk) {
    const std::size_t end = std::min(indices.size(), start + kEvalChunk);
    std::vector<Index> chunk(indices.begin() + static_cast<std::ptrdiff_t>(start),
                             indices.begin() + static_cast<std::ptrdiff_t>(end));
    fn(chunk, start);
  }
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation; zero for fewer than two values.
double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw InvalidArgument("expected boolean, got '" + v + "'");
}

}  // namespace

// ---- configuration ----

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::None: return "none";
    case Ablation::NoIntra: return "no-intra";
    case Ablation::NoInter: return "no-inter";
    case Ablation::NoMI: return "no-mi";
    case Ablation::NoConsistency: return "no-consistency";
    case Ablation::UniformPrior: return "uniform-prior";
    case Ablation::RandomPrior: return "random-prior";
  }
  return "none";
}

Ablation parse_ablation(const std::string& s) {
  for (Ablation a : {Ablation::None, Ablation::NoIntra, Ablation::NoInter, Ablation::NoMI, Ablation::NoConsistency,
                     Ablation::UniformPrior, Ablation::RandomPrior}) {
    if (to_string(a) == s) return a;
  }
  throw InvalidArgument("unknown ablation '" + s + "'");
}

void TrainConfig::validate() const {
  if (factors <= 0 || dim <= 0 || layers <= 0) throw InvalidArgument("config: k, dim and layers must be positive");
  if (dim % factors != 0) throw InvalidArgument("config: dim must be divisible by k");
  if (lambda < 0 || gamma < 0) throw InvalidArgument("config: lambda and gamma must be >= 0");
  if (!(learning_rate > 0)) throw InvalidArgument("config: lr must be positive");
  if (epochs <= 0 || labeled_batch <= 0 || unlabeled_batch <= 0) {
    throw InvalidArgument("config: epochs and batch sizes must be positive");
  }
  if (!(label_ratio > 0 && label_ratio <= 1)) throw InvalidArgument("config: label-ratio must be in (0, 1]");
  if (folds < 2 || repeats < 1) throw InvalidArgument("config: need folds >= 2 and repeats >= 1");
  if (!(temperature > 0)) throw InvalidArgument("config: temperature must be positive");
  if (threads < 1) throw InvalidArgument("config: threads must be >= 1");
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  try {
    if (key == "dataset") dataset = value;
    else if (key == "data-dir") data_dir = value;
    else if (key == "k") factors = std::stol(value);
    else if (key == "dim") dim = std::stol(value);
    else if (key == "layers") layers = std::stol(value);
    else if (key == "lambda") lambda = std::stod(value);
    else if (key == "gamma") gamma = std::stod(value);
    else if (key == "lr") learning_rate = std::stod(value);
    else if (key == "epochs") epochs = std::stoi(value);
    else if (key == "batch-labeled") labeled_batch = std::stol(value);
    else if (key == "batch-unlabeled") unlabeled_batch = std::stol(value);
    else if (key == "label-ratio") label_ratio = std::stod(value);
    else if (key == "folds") folds = std::stoi(value);
    else if (key == "repeats") repeats = std::stoi(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "temperature") temperature = std::stod(value);
    else if (key == "ablation") ablation = parse_ablation(value);
    else if (key == "inclusive-denominator") inclusive_denominator = parse_bool(value);
    else if (key == "detach-prior") detach_prior = parse_bool(value);
    else if (key == "classifier-hidden") classifier_hidden = std::stol(value);
    else if (key == "scorer-hidden") scorer_hidden = std::stol(value);
    else if (key == "max-degree") max_degree = std::stol(value);
    else if (key == "degree-features") degree_features = parse_bool(value);
    else if (key == "threads") threads = std::stoi(value);
    else if (key == "out") out_dir = value;
    else throw InvalidArgument("unknown config key '" + key + "'");
  } catch (const std::invalid_argument& e) {
    if (dynamic_cast<const InvalidArgument*>(&e) && std::string(e.what()).find(key) != std::string::npos) throw;
    throw InvalidArgument("config key '" + key + "': cannot parse '" + value + "'");
  } catch (const std::out_of_range&) {
    throw InvalidArgument("config key '" + key + "': value out of range '" + value + "'");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"dataset", dataset},
          {"data_dir", data_dir.string()},
          {"k", factors},
          {"dim", dim},
          {"layers", layers},
          {"lambda", lambda},
          {"gamma", gamma},
          {"lr", learning_rate},
          {"epochs", epochs},
          {"batch_labeled", labeled_batch},
          {"batch_unlabeled", unlabeled_batch},
          {"label_ratio", label_ratio},
          {"folds", folds},
          {"repeats", repeats},
          {"seed", seed},
          {"temperature", temperature},
          {"ablation", to_string(ablation)},
          {"inclusive_denominator", inclusive_denominator},
          {"detach_prior", detach_prior},
          {"classifier_hidden", classifier_hidden},
          {"scorer_hidden", scorer_hidden},
          {"max_degree", max_degree},
          {"degree_features", degree_features}};
}

TrainConfig load_config_file(const std::filesystem::path& file, TrainConfig base) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open config file " + file.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(file.string() + ":" + std::to_string(number) + ": expected key=value");
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    try {
      base.set(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw ParseError(file.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return base;
}

GraphDataset load_dataset(const TrainConfig& config) {
  GraphDataset ds = parse_tu_dataset(config.data_dir / config.dataset, config.dataset);
  if (ds.feature_dim == 0 || config.degree_features) {
    const Index cap = config.max_degree > 0 ? config.max_degree : default_max_degree(ds);
    ds = synthesize_degree_features(ds, cap);
  }
  return ds;
}

// ---- model ----

Model Model::initialize(const TrainConfig& config, Index input_dim, int classes, std::mt19937_64& rng) {
  EncoderConfig enc;
  enc.input_dim = input_dim;
  enc.dim = config.dim;
  enc.factors = config.factors;
  enc.layers = config.layers;
  enc.scorer_hidden = config.scorer_hidden;
  HeadConfig head;
  head.factors = config.factors;
  head.factor_dim = enc.factor_dim();
  head.hidden = config.classifier_hidden;
  head.classes = classes;
  Model m;
  m.supervised_encoder = EncoderParams::initialize(enc, rng, "sup");
  m.unsupervised_encoder = EncoderParams::initialize(enc, rng, "unsup");
  m.head = SupervisedHeadParams::initialize(head, rng);
  m.discriminator = Discriminator(config.factors, enc.factor_dim(), rng);
  return m;
}

std::vector<ad::Parameter*> Model::parameters() {
  std::vector<ad::Parameter*> out = supervised_encoder.parameters();
  for (auto* p : unsupervised_encoder.parameters()) out.push_back(p);
  for (auto* p : head.parameters()) out.push_back(p);
  for (auto& w : discriminator.weights) out.push_back(&w);
  return out;
}

std::vector<const ad::Parameter*> Model::parameters() const {
  auto mutable_params = const_cast<Model*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

// ---- training ----

StepLosses training_step(Model& model, const Batch& batch, const TrainConfig& config, std::mt19937_64& rng,
                         bool backward) {
  const Index k = config.factors;
  ad::Tape tape;
  EncoderVars sup_enc = bind(tape, model.supervised_encoder);
  EncoderVars unsup_enc = bind(tape, model.unsupervised_encoder);
  HeadVars head = bind(tape, model.head);
  std::vector<Var> disc = bind(tape, model.discriminator);

  EncodeResult sup = encode(batch, sup_enc);
  EncodeResult unsup = encode(batch, unsup_enc);
  Var attention = factor_attention(sup.representations, head.prototypes, k);
  Var probs = predict(sup.representations, attention, head);
  SupervisedLoss ls = supervised_loss(probs, batch.labels, batch.labeled_mask);

  StepLosses out;
  out.supervised = ls.loss.scalar();
  out.has_labeled = ls.has_labeled;
  Var total = ls.loss;

  const bool multi = batch.graph_count() >= 2;
  // The random streams are consumed identically whatever the ablation.
  std::optional<GlobalLocalPairs> pairs;
  if (multi) pairs = sample_global_local_pairs(batch, rng);
  Matrix random_prior = Matrix::Zero(batch.graph_count(), k);
  {
    std::uniform_int_distribution<Index> pick(0, k - 1);
    for (Index i = 0; i < batch.graph_count(); ++i) random_prior(i, pick(rng)) = 1.0;
  }

  const bool use_intra = config.ablation != Ablation::NoIntra && config.ablation != Ablation::NoMI;
  const bool use_inter = config.ablation != Ablation::NoInter && config.ablation != Ablation::NoMI;
  const bool use_unsup = multi && (use_intra || use_inter);
  const bool use_elbo = multi && config.ablation != Ablation::NoConsistency;

  if (multi) {
    UnsupervisedTerms lu = unsupervised_loss(unsup.representations, unsup.node_embeddings, *pairs, disc);
    out.intra = lu.intra.scalar();
    out.inter = lu.inter.scalar();
    Var active = use_intra && use_inter ? lu.total : (use_intra ? lu.intra : lu.inter);
    if (use_unsup) {
      out.unsupervised = active.scalar();
      out.lambda = config.lambda;
      if (config.lambda > 0) total = ad::add(total, ad::scale(active, config.lambda));
    }

    AlignmentOptions opts;
    opts.temperature = config.temperature;
    opts.denominator = config.inclusive_denominator ? Denominator::IncludePositive : Denominator::ExcludePositive;
    Var log_lik = alignment_log_likelihood(sup.representations, unsup.representations, k, opts);
    Var prior = attention;
    if (config.ablation == Ablation::UniformPrior) {
      prior = tape.constant(Matrix::Constant(batch.graph_count(), k, 1.0 / static_cast<double>(k)));
    } else if (config.ablation == Ablation::RandomPrior) {
      prior = tape.constant(random_prior);
    }
    const Matrix q = e_step(prior.value(), log_lik.value());
    Var bound = elbo(q, log_lik, prior, config.detach_prior);
    out.elbo = bound.scalar();
    if (use_elbo) {
      out.gamma = config.gamma;
      if (config.gamma > 0) total = ad::sub(total, ad::scale(bound, config.gamma));
    }
  }
  out.total = total.scalar();
  if (!std::isfinite(out.total)) {
    throw DivergenceError("non-finite training loss (L_S=" + std::to_string(out.supervised) +
                          ", L_U=" + std::to_string(out.unsupervised) + ", ELBO=" + std::to_string(out.elbo) + ")");
  }
  if (backward) tape.backward(total);
  return out;
}

std::vector<int> predict_labels(Model& model, const GraphDataset& dataset, const std::vector<Index>& indices) {
  std::vector<int> out(indices.size(), 0);
  for_each_chunk(indices, [&](const std::vector<Index>& chunk, std::size_t start) {
    Batch batch = batch_indices(dataset, chunk, std::vector<bool>(chunk.size(), false));
    ad::Tape tape;
    SupervisedForward f = supervised_forward(tape, model, batch);
    const Matrix& p = f.probabilities.value();
    for (Index i = 0; i < p.rows(); ++i) {
      Index arg = 0;
      p.row(i).maxCoeff(&arg);
      out[start + static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
  });
  return out;
}

double evaluate(Model& model, const GraphDataset& dataset, const std::vector<Index>& indices) {
  if (indices.empty()) return 0.0;
  const std::vector<int> pred = predict_labels(model, dataset, indices);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& label = dataset.graphs[static_cast<std::size_t>(indices[i])].label;
    if (!label) throw InvalidArgument("evaluate: graph without label");
    if (pred[i] == *label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

FoldOutcome train_fold(const TrainConfig& config, const GraphDataset& dataset, const Fold& fold, int fold_index,
                       int repeat) {
  config.validate();
  if (fold.train.empty()) throw InvalidArgument("train_fold: empty training split");
  const auto start_time = std::chrono::steady_clock::now();
  std::mt19937_64 rng(mix_seed(config.seed, static_cast<std::uint64_t>(repeat), static_cast<std::uint64_t>(fold_index)));
  Model model = Model::initialize(config, dataset.feature_dim, dataset.num_classes, rng);
  Adam::Options adam_opts;
  adam_opts.learning_rate = config.learning_rate;
  Adam optimizer(model.parameters(), adam_opts);

  const std::set<Index> labeled_set(fold.labeled_train.begin(), fold.labeled_train.end());
  std::vector<Index> pool = fold.train;
  std::vector<Index> labeled = fold.labeled_train;
  std::size_t labeled_cursor = labeled.size();  // forces a shuffle on first use
  const auto ub = static_cast<std::size_t>(config.unlabeled_batch);
  const auto lb = static_cast<std::size_t>(config.labeled_batch);

  FoldOutcome outcome{FoldResult{}, model};
  FoldResult& result = outcome.result;
  result.repeat = repeat;
  result.fold = fold_index;
  double best_val = -1.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(pool.begin(), pool.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    int steps = 0;
    for (std::size_t start = 0; start < pool.size(); start += ub) {
      std::vector<Index> members;
      std::set<Index> in_batch;
      for (std::size_t i = 0; i < lb && !labeled.empty(); ++i) {
        if (labeled_cursor >= labeled.size()) {
          std::shuffle(labeled.begin(), labeled.end(), rng);
          labeled_cursor = 0;
        }
        const Index g = labeled[labeled_cursor++];
        if (in_batch.insert(g).second) members.push_back(g);
      }
      const std::size_t end = std::min(pool.size(), start + ub);
      for (std::size_t i = start; i < end; ++i) {
        if (in_batch.insert(pool[i]).second) members.push_back(pool[i]);
      }
      std::vector<bool> mask(members.size());
      for (std::size_t i = 0; i < members.size(); ++i) mask[i] = labeled_set.count(members[i]) > 0;
      Batch batch = batch_indices(dataset, members, mask);

      optimizer.zero_grad();
      StepLosses losses;
      try {
        losses = training_step(model, batch, config, rng, true);
      } catch (const DivergenceError& e) {
        throw DivergenceError("repeat " + std::to_string(repeat) + " fold " + std::to_string(fold_index) + " epoch " +
                              std::to_string(epoch) + ": " + e.what());
      }
      optimizer.step();
      log.supervised += losses.supervised;
      log.intra += losses.intra;
      log.inter += losses.inter;
      log.unsupervised += losses.unsupervised;
      log.elbo += losses.elbo;
      log.total += losses.total;
      ++steps;
    }
    const double inv = 1.0 / std::max(steps, 1);
    log.supervised *= inv;
    log.intra *= inv;
    log.inter *= inv;
    log.unsupervised *= inv;
    log.elbo *= inv;
    log.total *= inv;

    log.test_accuracy = evaluate(model, dataset, fold.test);
    bool better = false;
    if (fold.validation.empty()) {
      better = true;  // no validation part: keep the latest epoch
    } else {
      log.validation_accuracy = evaluate(model, dataset, fold.validation);
      better = log.validation_accuracy >= best_val;  // ties go to the later epoch
    }
    if (better) {
      best_val = log.validation_accuracy;
      result.best_epoch = epoch;
      result.validation_accuracy = log.validation_accuracy;
      result.test_accuracy = log.test_accuracy;
      outcome.model = model;
    }
    result.history.push_back(log);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return outcome;
}

// ---- cross-validation ----

void MetricsRecord::aggregate() {
  std::vector<double> all;
  std::vector<double> val;
  int max_repeat = -1;
  for (const FoldResult& f : folds) {
    all.push_back(f.test_accuracy);
    val.push_back(f.validation_accuracy);
    max_repeat = std::max(max_repeat, f.repeat);
  }
  mean_accuracy = mean_of(all);
  std_over_folds = stddev_of(all);
  mean_validation_accuracy = mean_of(val);
  repeat_means.assign(static_cast<std::size_t>(max_repeat + 1), 0.0);
  std::vector<int> counts(repeat_means.size(), 0);
  for (const FoldResult& f : folds) {
    repeat_means[static_cast<std::size_t>(f.repeat)] += f.test_accuracy;
    ++counts[static_cast<std::size_t>(f.repeat)];
  }
  for (std::size_t r = 0; r < repeat_means.size(); ++r) {
    if (counts[r] > 0) repeat_means[r] /= counts[r];
  }
  std_over_repeats = stddev_of(repeat_means);
}

nlohmann::json MetricsRecord::to_json() const {
  nlohmann::json per_fold = nlohmann::json::array();
  for (const FoldResult& f : folds) {
    per_fold.push_back({{"repeat", f.repeat},
                        {"fold", f.fold},
                        {"test_accuracy", f.test_accuracy},
                        {"validation_accuracy", f.validation_accuracy},
                        {"best_epoch", f.best_epoch},
                        {"seconds", f.seconds}});
  }
  return {{"mean_accuracy", mean_accuracy},
          {"std_over_folds", std_over_folds},
          {"std_over_repeats", std_over_repeats},
          {"mean_validation_accuracy", mean_validation_accuracy},
          {"repeat_means", repeat_means},
          {"folds", per_fold}};
}

MetricsRecord run_cv(const TrainConfig& config, const GraphDataset& dataset, const FoldCallback& on_fold) {
  config.validate();
  struct Job {
    int repeat;
    int fold;
  };
  std::vector<SplitPlan> plans;
  std::vector<Job> jobs;
  for (int r = 0; r < config.repeats; ++r) {
    plans.push_back(make_splits(dataset, config.folds, config.label_ratio, mix_seed(config.seed, 0xC0FFEE, static_cast<std::uint64_t>(r))));
    for (int f = 0; f < config.folds; ++f) jobs.push_back({r, f});
  }

  MetricsRecord metrics;
  metrics.folds.resize(jobs.size());
  std::mutex callback_mutex;
  std::exception_ptr failure;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t j = next++;
      if (j >= jobs.size()) return;
      try {
        const Job job = jobs[j];
        const SplitPlan& plan = plans[static_cast<std::size_t>(job.repeat)];
        FoldOutcome o = train_fold(config, dataset, plan.folds[static_cast<std::size_t>(job.fold)], job.fold, job.repeat);
        spdlog::info("repeat {} fold {}: test acc {:.4f} (val {:.4f}, epoch {}, {:.1f}s)", job.repeat, job.fold,
                     o.result.test_accuracy, o.result.validation_accuracy, o.result.best_epoch, o.result.seconds);
        std::lock_guard<std::mutex> lock(callback_mutex);
        if (on_fold) on_fold(o.result, o.model, plan);
        metrics.folds[j] = std::move(o.result);
      } catch (...) {
        std::lock_guard<std::mutex> lock(callback_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
        return;
      }
    }
  };
  const int threads = std::min<int>(config.threads, static_cast<int>(jobs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  metrics.aggregate();
  return metrics;
}

// ---- analysis exports ----

Matrix absolute_correlation(const Matrix& samples) {
  const Index d = samples.cols();
  Matrix centered = samples.rowwise() - samples.colwise().mean();
  Eigen::VectorXd norms = centered.colwise().norm().transpose();
  Matrix cov = centered.transpose() * centered;
  Matrix out = Matrix::Identity(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      if (i == j) continue;
      const double denom = norms(i) * norms(j);
      out(i, j) = denom > 1e-12 ? std::min(1.0, std::abs(cov(i, j)) / denom) : 0.0;
    }
  }
  return out;
}

BlockCorrelation block_correlation(const Matrix& corr, Index factors) {
  if (factors <= 0 || corr.rows() != corr.cols() || corr.rows() % factors != 0) {
    throw InvalidArgument("block_correlation: matrix size not divisible by factor count");
  }
  const Index m = corr.rows() / factors;
  double within = 0.0;
  double across = 0.0;
  long n_within = 0;
  long n_across = 0;
  for (Index i = 0; i < corr.rows(); ++i) {
    for (Index j = 0; j < corr.cols(); ++j) {
      if (i == j) continue;
      if (i / m == j / m) {
        within += corr(i, j);
        ++n_within;
      } else {
        across += corr(i, j);
        ++n_across;
      }
    }
  }
  BlockCorrelation b;
  b.within = n_within ? within / static_cast<double>(n_within) : 0.0;
  b.across = n_across ? across / static_cast<double>(n_across) : 0.0;
  return b;
}

Matrix supervised_representations(Model& model, const GraphDataset& dataset, const std::vector<Index>& indices) {
  Matrix out(static_cast<Index>(indices.size()), model.supervised_encoder.config.dim);
  for_each_chunk(indices, [&](const std::vector<Index>& chunk, std::size_t start) {
    Batch batch = batch_indices(dataset, chunk, std::vector<bool>(chunk.size(), false));
    ad::Tape tape;
    EncoderVars enc = bind(tape, model.supervised_encoder);
    out.middleRows(static_cast<Index>(start), static_cast<Index>(chunk.size())) = encode(batch, enc).representations.value();
  });
  return out;
}

void export_artifacts(Model& model, const GraphDataset& dataset, const std::vector<Index>& indices,
                      const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const Index k = model.supervised_encoder.config.factors;

  const Matrix corr = absolute_correlation(supervised_representations(model, dataset, indices));
  {
    std::ofstream out(out_dir / "correlation.csv");
    out.precision(10);
    for (Index i = 0; i < corr.rows(); ++i) {
      for (Index j = 0; j < corr.cols(); ++j) out << (j ? "," : "") << corr(i, j);
      out << '\n';
    }
  }

  std::ofstream coeff(out_dir / "coefficients.csv");
  std::ofstream attn(out_dir / "attention.csv");
  coeff.precision(10);
  attn.precision(10);
  coeff << "graph,src,dst";
  attn << "graph";
  for (Index f = 0; f < k; ++f) {
    coeff << ",k" << f;
    attn << ",k" << f;
  }
  coeff << '\n';
  attn << '\n';
  for_each_chunk(indices, [&](const std::vector<Index>& chunk, std::size_t) {
    Batch batch = batch_indices(dataset, chunk, std::vector<bool>(chunk.size(), false));
    ad::Tape tape;
    SupervisedForward f = supervised_forward(tape, model, batch);
    const Matrix& c = f.coefficients.value();
    for (Index e = 0; e < batch.edge_count(); ++e) {
      const Index src = batch.edge_src[static_cast<std::size_t>(e)];
      const Index g = batch.graph_ids[static_cast<std::size_t>(src)];
      const Index offset = batch.node_offsets[static_cast<std::size_t>(g)];
      coeff << batch.surrogate_labels[static_cast<std::size_t>(g)] << ',' << (src - offset) << ','
            << (batch.edge_dst[static_cast<std::size_t>(e)] - offset);
      for (Index f2 = 0; f2 < k; ++f2) coeff << ',' << c(e, f2);
      coeff << '\n';
    }
    const Matrix& a = f.attention.value();
    for (Index g = 0; g < batch.graph_count(); ++g) {
      attn << batch.surrogate_labels[static_cast<std::size_t>(g)];
      for (Index f2 = 0; f2 < k; ++f2) attn << ',' << a(g, f2);
      attn << '\n';
    }
  });
}

void write_history_csv(const MetricsRecord& metrics, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.precision(10);
  out << "repeat,fold,epoch,supervised,intra,inter,unsupervised,elbo,total,validation_accuracy,test_accuracy\n";
  for (const FoldResult& f : metrics.folds) {
    for (const EpochLog& e : f.history) {
      out << f.repeat << ',' << f.fold << ',' << e.epoch << ',' << e.supervised << ',' << e.intra << ',' << e.inter << ','
          << e.unsupervised << ',' << e.elbo << ',' << e.total << ',' << e.validation_accuracy << ',' << e.test_accuracy
          << '\n';
    }
  }
}

}  // namespace disensemi
