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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "prefalign/error.hpp"
#include "prefalign/numerics/format.hpp"
#include "prefalign/numerics/seeds.hpp"
#include "prefalign/trainer/trainer.hpp"
#include "spdlog/spdlog.h"

namespace prefalign::trainer {

using numerics::Var;
using prefloss::LossVariant;

void TrainConfig::validate() const {
  if (epochs < 1) throw UsageError("epochs must be >= 1");
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
    throw UsageError("learning rate must be finite and >= 0");
  }
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
  if (checkpoint_every && *checkpoint_every < 1) throw UsageError("checkpoint_every must be >= 1");
  if (max_grad_norm && !(*max_grad_norm > 0.0 && std::isfinite(*max_grad_norm))) {
    throw UsageError("max_grad_norm must be finite and > 0");
  }
  if (kl_samples_per_prompt < 1) throw UsageError("KL samples per prompt must be >= 1");
  if (kl_max_new_tokens < 1) throw UsageError("KL max new tokens must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw UsageError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw UsageError("Adam epsilon must be > 0");
  loss.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json loss = {
      {"variant", prefloss::to_string(c.loss.variant)},
      {"beta", c.loss.beta},
      {"delta", c.loss.delta ? nlohmann::json(*c.loss.delta) : nlohmann::json(nullptr)},
      {"w_desirable", c.loss.w_desirable},
      {"w_undesirable", c.loss.w_undesirable},
      {"zref_policy", prefloss::to_string(c.loss.zref_policy)},
      {"slic_target", prefloss::to_string(c.loss.slic_target)},
  };
  return {
      {"epochs", c.epochs},
      {"learning_rate", c.learning_rate},
      {"batch_size", c.batch_size},
      {"seed", c.seed},
      {"loss", loss},
      {"checkpoint_every",
       c.checkpoint_every ? nlohmann::json(*c.checkpoint_every) : nlohmann::json(nullptr)},
      {"max_grad_norm",
       c.max_grad_norm ? nlohmann::json(*c.max_grad_norm) : nlohmann::json(nullptr)},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_epsilon", c.adam_epsilon},
      {"kl_samples_per_prompt", c.kl_samples_per_prompt},
      {"kl_max_new_tokens", c.kl_max_new_tokens},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  try {
    TrainConfig c;
    c.epochs = j.at("epochs").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& l = j.at("loss");
    c.loss.variant = prefloss::parse_loss_variant(l.at("variant").get<std::string>());
    c.loss.beta = l.at("beta").get<double>();
    if (!l.at("delta").is_null()) c.loss.delta = l.at("delta").get<double>();
    c.loss.w_desirable = l.at("w_desirable").get<double>();
    c.loss.w_undesirable = l.at("w_undesirable").get<double>();
    c.loss.zref_policy = prefloss::parse_zref_policy(l.at("zref_policy").get<std::string>());
    c.loss.slic_target = prefloss::parse_slic_target(l.at("slic_target").get<std::string>());
    if (!j.at("checkpoint_every").is_null()) {
      c.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
    }
    if (j.contains("max_grad_norm") && !j.at("max_grad_norm").is_null()) {
      c.max_grad_norm = j.at("max_grad_norm").get<double>();
    }
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.adam_epsilon = j.at("adam_epsilon").get<double>();
    c.kl_samples_per_prompt = j.at("kl_samples_per_prompt").get<std::size_t>();
    c.kl_max_new_tokens = j.at("kl_max_new_tokens").get<std::size_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed train config: ") + e.what());
  }
}

std::string metrics_csv(const RunMetrics& metrics) {
  using numerics::format_double;
  std::ostringstream out;
  out << kMetricsHeader << '\n';
  for (const auto& e : metrics.epochs) {
    out << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.margin) << ','
        << format_double(e.train_acc) << ',' << format_double(e.heldout_acc) << ','
        << format_double(e.kl) << '\n';
  }
  return out.str();
}

namespace {

void check_fits(const eval::EncodedTriple& t, std::size_t context, std::size_t index) {
  std::size_t longest = std::max(t.chosen.size(), t.rejected.size());
  if (t.target) longest = std::max(longest, t.target->size());
  if (t.prompt.size() + longest > context) {
    throw lm::ContextOverflowError("triple " + std::to_string(index) + " needs " +
                                   std::to_string(t.prompt.size() + longest) +
                                   " tokens > context length " + std::to_string(context));
  }
}

std::vector<ScoredTriple> prepare(std::span<const data::PreferenceTriple> triples,
                                  const lm::Vocabulary& vocab, lm::Scorer& reference,
                                  std::size_t context) {
  std::vector<ScoredTriple> out;
  out.reserve(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    check_fits(eval::encode_triple(vocab, triples[i]), context, i);
    out.push_back(score_triple(vocab, triples[i], reference));
  }
  return out;
}

double accuracy(const lm::ModelParams& policy, std::span<const ScoredTriple> examples, double beta) {
  lm::Scorer scorer(policy);
  std::vector<prefloss::LogProbQuad> quads;
  quads.reserve(examples.size());
  for (const auto& e : examples) {
    quads.push_back({scorer.logprob(e.tokens.prompt, e.tokens.chosen),
                     scorer.logprob(e.tokens.prompt, e.tokens.rejected), e.ref_chosen,
                     e.ref_rejected});
  }
  return eval::preference_accuracy(quads, beta).fraction();
}

std::string describe_batch(std::size_t epoch, std::size_t batch,
                           std::span<const std::size_t> indices) {
  std::string s = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                  " (train examples";
  for (std::size_t i : indices) s += " " + std::to_string(i);
  return s + ")";
}

}  // namespace

ScoredTriple score_triple(const lm::Vocabulary& vocab, const data::PreferenceTriple& triple,
                          lm::Scorer& reference) {
  ScoredTriple s{eval::encode_triple(vocab, triple), 0.0, 0.0};
  s.ref_chosen = reference.logprob(s.tokens.prompt, s.tokens.chosen);
  s.ref_rejected = reference.logprob(s.tokens.prompt, s.tokens.rejected);
  return s;
}

double batch_zref(const lm::ModelParams& policy, lm::Scorer& reference,
                  std::span<const ScoredTriple* const> batch, double beta) {
  if (batch.size() < 2) return 0.0;
  lm::Scorer scorer(policy);
  const std::size_t context = policy.config.context_length;
  std::vector<prefloss::LogProbPair> pairs;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& prompt = batch[i]->tokens.prompt;
    const auto& completion = batch[(i + 1) % batch.size()]->tokens.chosen;
    if (prompt.size() + completion.size() > context) continue;
    pairs.push_back({scorer.logprob(prompt, completion), reference.logprob(prompt, completion)});
  }
  if (pairs.empty()) return 0.0;
  return prefloss::batch_kl_zref(pairs, beta);
}

BatchLoss batch_loss(const lm::BoundModel& model, std::span<const ScoredTriple* const> batch,
                     const prefloss::LossConfig& config, double z_ref) {
  numerics::Tape& tape = model.tape();
  BatchLoss out;
  std::vector<Var> regularizer;
  for (const ScoredTriple* e : batch) {
    const auto& t = e->tokens;
    const Var pc = model.sequence_logprob(t.prompt, t.chosen);
    const Var pr = model.sequence_logprob(t.prompt, t.rejected);
    out.quads.push_back({pc, pr, tape.constant(e->ref_chosen), tape.constant(e->ref_rejected)});
    if (config.variant == LossVariant::kSlic) {
      if (config.slic_target == prefloss::SlicTarget::kChosen) {
        regularizer.push_back(pc);
      } else {
        if (!t.target) throw UsageError("SLiC with an external target: triple has no target");
        regularizer.push_back(model.sequence_logprob(t.prompt, *t.target));
      }
    }
  }
  switch (config.variant) {
    case LossVariant::kDpo:
      out.loss = prefloss::dpo_loss(out.quads, config.beta).loss;
      break;
    case LossVariant::kIpo:
      out.loss = prefloss::ipo_loss(out.quads, config.beta);
      break;
    case LossVariant::kSlic:
      out.loss = prefloss::slic_loss(out.quads, *config.delta, config.beta, regularizer);
      break;
    case LossVariant::kKto: {
      std::vector<prefloss::Pair<Var>> desirable;
      std::vector<prefloss::Pair<Var>> undesirable;
      for (const auto& q : out.quads) {
        desirable.push_back({q.policy_chosen, q.ref_chosen});
        undesirable.push_back({q.policy_rejected, q.ref_rejected});
      }
      out.loss = prefloss::kto_loss(desirable, undesirable, config, z_ref);
      break;
    }
  }
  return out;
}

TrainResult preference_train(const lm::ModelParams& base, const lm::Vocabulary& vocab,
                             const data::PreferenceDataset& dataset, const TrainConfig& config,
                             const CheckpointFn& on_checkpoint) {
  config.validate();
  if (base.config.vocab_size != vocab.size()) {
    throw UsageError("model vocab_size " + std::to_string(base.config.vocab_size) +
                     " != vocabulary size " + std::to_string(vocab.size()));
  }
  const auto& loss_cfg = config.loss;
  const std::vector<data::PreferenceTriple> train_triples = dataset.subset(data::Split::kTrain);
  const std::vector<data::PreferenceTriple> heldout_triples =
      dataset.is_split() ? dataset.subset(data::Split::kHeldout)
                         : std::vector<data::PreferenceTriple>{};
  if (train_triples.empty()) throw UsageError("preference_train: empty train split");
  if (loss_cfg.variant == LossVariant::kSlic &&
      loss_cfg.slic_target == prefloss::SlicTarget::kExternalTarget) {
    for (std::size_t i = 0; i < train_triples.size(); ++i) {
      if (!train_triples[i].target) {
        throw UsageError("SLiC with an external target: train triple " + std::to_string(i) +
                         " has no \"target\"");
      }
    }
  }

  const lm::ModelParams reference = base;
  TrainResult result;
  result.reference_hash_before = reference.weights.sha256();
  lm::Scorer ref_scorer(reference);
  const std::size_t context = base.config.context_length;
  const std::vector<ScoredTriple> train = prepare(train_triples, vocab, ref_scorer, context);
  const std::vector<ScoredTriple> heldout = prepare(heldout_triples, vocab, ref_scorer, context);
  std::vector<lm::TokenSequence> kl_prompts;
  for (const auto& e : heldout.empty() ? train : heldout) kl_prompts.push_back(e.tokens.prompt);

  result.policy = base;
  auto& policy = result.policy;
  numerics::AdamConfig adam_cfg{config.learning_rate, config.adam_beta1, config.adam_beta2,
                                config.adam_epsilon};
  numerics::AdamState adam(policy.weights, adam_cfg);

  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(config.seed + epoch);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    double margin_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> indices(order.data() + start, end - start);
      std::vector<const ScoredTriple*> batch;
      for (std::size_t i : indices) batch.push_back(&train[i]);

      double z_ref = 0.0;
      if (loss_cfg.variant == LossVariant::kKto &&
          loss_cfg.zref_policy == prefloss::ZrefPolicy::kBatchKl) {
        z_ref = batch_zref(policy, ref_scorer, batch, loss_cfg.beta);
      }

      numerics::Tape tape;
      lm::BoundModel model(tape, policy, true);
      BatchLoss built;
      try {
        built = batch_loss(model, batch, loss_cfg, z_ref);
      } catch (const UsageError&) {
        throw;
      } catch (const Error& e) {
        throw Error(std::string(e.what()) + " at " + describe_batch(epoch, batch_index, indices));
      }
      const auto& [loss, quads] = built;

      const double value = tape.scalar(loss);
      if (!std::isfinite(value)) {
        throw Error("non-finite loss at " + describe_batch(epoch, batch_index, indices));
      }
      if (!result.metrics.first_batch_loss) result.metrics.first_batch_loss = value;
      loss_sum += value * static_cast<double>(batch.size());
      for (const auto& q : quads) margin_sum += tape.scalar(prefloss::margin(q, loss_cfg.beta));

      tape.backward(loss);
      numerics::ParameterSet grads = policy.weights.zeros_like();
      model.accumulate_grads(grads);
      if (config.max_grad_norm) numerics::clip_grad_norm(grads, *config.max_grad_norm);
      try {
        numerics::adam_step(policy.weights, grads, adam);
      } catch (const Error& e) {
        throw Error(std::string(e.what()) + " at " + describe_batch(epoch, batch_index, indices));
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(train.size());
    m.margin = margin_sum / static_cast<double>(train.size());
    m.train_acc = accuracy(policy, train, loss_cfg.beta);
    m.heldout_acc = heldout.empty() ? m.train_acc : accuracy(policy, heldout, loss_cfg.beta);
    eval::KlOptions kl;
    kl.samples_per_prompt = config.kl_samples_per_prompt;
    kl.max_new_tokens = config.kl_max_new_tokens;
    kl.seed = numerics::derive_seed(config.seed, {epoch});
    kl.eos = vocab.eos();
    const eval::KlEstimate est = eval::kl_to_reference(policy, reference, kl_prompts, kl);
    m.kl = est.mean;
    m.kl_se = est.standard_error;
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (double v : {m.loss, m.margin, m.kl}) {
      if (!std::isfinite(v)) throw Error("non-finite metric in epoch " + std::to_string(epoch));
    }
    spdlog::info("{} beta={} epoch {}/{}: loss={:.6f} margin={:.6f} train_acc={:.4f} "
                 "heldout_acc={:.4f} kl={:.5f}+-{:.5f} ({:.1f}s)",
                 prefloss::to_string(loss_cfg.variant), loss_cfg.beta, epoch, config.epochs,
                 m.loss, m.margin, m.train_acc, m.heldout_acc, m.kl, m.kl_se, m.seconds);
    result.metrics.epochs.push_back(m);

    if (on_checkpoint && config.checkpoint_every && epoch % *config.checkpoint_every == 0) {
      on_checkpoint(epoch, policy);
    }
  }

  result.reference_hash_after = reference.weights.sha256();
  if (result.reference_hash_after != result.reference_hash_before) {
    throw Error("reference parameters changed during training");
  }
  return result;
}

}  // namespace prefalign::trainer
