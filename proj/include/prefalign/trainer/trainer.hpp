// Copyright 2026 The prefalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PREFALIGN_TRAINER_TRAINER_HPP_
#define PREFALIGN_TRAINER_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "prefalign/data/dataset.hpp"
#include "prefalign/eval/metrics.hpp"
#include "prefalign/lm/model.hpp"
#include "prefalign/lm/vocabulary.hpp"
#include "prefalign/numerics/adam.hpp"
#include "prefalign/prefloss/losses.hpp"

namespace prefalign::trainer {

// ---- pretraining ----

struct PretrainOptions {
  std::size_t steps = 500;
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  // Called after every step with (step index, batch loss).
  std::function<void(std::size_t, double)> on_step;
};

// Next-token cross-entropy over <bos> sentence <eos>, averaged per token
// within a batch. Sentences are visited in a seeded shuffled order, reshuffled
// on every pass. Model weights start from init_params(config). Throws Error
// naming the step on a non-finite loss.
lm::ModelParams pretrain(std::span<const std::string> corpus, const lm::Vocabulary& vocab,
                         const lm::ModelConfig& config, const PretrainOptions& options);

// exp of the mean per-token negative log-likelihood of the corpus.
double corpus_perplexity(const lm::ModelParams& params, const lm::Vocabulary& vocab,
                         std::span<const std::string> corpus);

// ---- preference training ----

struct TrainConfig {
  std::size_t epochs = 5;
  double learning_rate = 1e-6;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  prefloss::LossConfig loss;
  // Save a checkpoint every this many epochs.
  std::optional<std::size_t> checkpoint_every;
  // Rescale each batch gradient to at most this global L2 norm. Off by default.
  std::optional<double> max_grad_norm;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Per-epoch KL estimate.
  std::size_t kl_samples_per_prompt = 4;
  std::size_t kl_max_new_tokens = 16;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // example-weighted mean of batch losses
  double margin = 0.0;    // mean training margin during the epoch
  double train_acc = 0.0;
  double heldout_acc = 0.0;  // train_acc again when there is no heldout split
  double kl = 0.0;
  double kl_se = 0.0;
  double seconds = 0.0;
};

struct RunMetrics {
  std::vector<EpochMetrics> epochs;
  // Loss of the very first batch, taken before any update.
  std::optional<double> first_batch_loss;
};

inline constexpr std::string_view kMetricsHeader = "epoch,loss,margin,train_acc,heldout_acc,kl";
// Wall-clock time is left out so the file is reproducible.
std::string metrics_csv(const RunMetrics& metrics);

struct TrainResult {
  lm::ModelParams policy;
  RunMetrics metrics;
  std::string reference_hash_before;
  std::string reference_hash_after;
};

// A triple in token form with its frozen reference log-probabilities.
struct ScoredTriple {
  eval::EncodedTriple tokens;
  double ref_chosen = 0.0;
  double ref_rejected = 0.0;
};

ScoredTriple score_triple(const lm::Vocabulary& vocab, const data::PreferenceTriple& triple,
                          lm::Scorer& reference);

// z_ref of a batch: each prompt paired with the chosen completion of the next
// example. Pairs that do not fit the context are skipped; 0 without pairs.
double batch_zref(const lm::ModelParams& policy, lm::Scorer& reference,
                  std::span<const ScoredTriple* const> batch, double beta);

struct BatchLoss {
  numerics::Var loss;
  std::vector<prefloss::Quad<numerics::Var>> quads;
};

// Records the configured loss of a batch on the model's tape. z_ref is only
// read by KTO.
BatchLoss batch_loss(const lm::BoundModel& model, std::span<const ScoredTriple* const> batch,
                     const prefloss::LossConfig& config, double z_ref);

using CheckpointFn = std::function<void(std::size_t epoch, const lm::ModelParams& policy)>;

// Trains a copy of base against a frozen copy of base on the dataset's train
// split. Throws Error on a non-finite loss (naming epoch, batch and example
// indices) and ContextOverflowError on a triple that does not fit.
TrainResult preference_train(const lm::ModelParams& base, const lm::Vocabulary& vocab,
                             const data::PreferenceDataset& dataset, const TrainConfig& config,
                             const CheckpointFn& on_checkpoint = {});

// ---- beta sweep ----

inline constexpr double kDefaultBetas[] = {0.01, 0.05, 0.1, 0.3, 0.5, 0.7};
inline constexpr double kDefaultSlicDelta = 1.0;

struct SweepCell {
  prefloss::LossVariant variant = prefloss::LossVariant::kDpo;
  double beta = 0.0;
  bool ok = false;
  std::string error;
  double heldout_acc = 0.0;
  std::optional<double> mc_acc;
  double kl = 0.0;
  double kl_se = 0.0;
};

struct SweepOptions {
  std::vector<prefloss::LossVariant> variants;
  std::vector<double> betas;
  // Shared by every cell; variant, beta and delta are overridden per cell.
  TrainConfig train;
  // Used for SLiC cells when train.loss.delta is unset.
  double slic_delta = kDefaultSlicDelta;
  eval::EvalOptions eval;
  std::size_t jobs = 1;
};

// One cell per (variant, beta) in row-major order. Each cell runs
// preference_train followed by eval::evaluate on the heldout split (the
// whole dataset when untagged) with options.eval and beta. A failing cell is
// recorded with ok = false and does not stop the sweep.
std::vector<SweepCell> beta_sweep(const lm::ModelParams& base, const lm::Vocabulary& vocab,
                                  const data::PreferenceDataset& dataset,
                                  const std::vector<data::MultipleChoiceItem>* mc_items,
                                  const SweepOptions& options);

inline constexpr std::string_view kSweepHeader = "variant,beta,heldout_acc,mc_acc,kl,status";
std::string sweep_csv(std::span<const SweepCell> cells);

}  // namespace prefalign::trainer

#endif  // PREFALIGN_TRAINER_TRAINER_HPP_
