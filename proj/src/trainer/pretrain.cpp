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
#include <cmath>
#include <numeric>
#include <random>

#include "prefalign/error.hpp"
#include "prefalign/numerics/seeds.hpp"
#include "prefalign/trainer/trainer.hpp"

namespace prefalign::trainer {

namespace {

struct EncodedSentence {
  lm::TokenSequence prompt;      // <bos>
  lm::TokenSequence completion;  // units then <eos>
};

std::vector<EncodedSentence> encode_corpus(std::span<const std::string> corpus,
                                           const lm::Vocabulary& vocab,
                                           std::size_t context_length) {
  std::vector<EncodedSentence> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EncodedSentence s{{vocab.bos()}, vocab.encode_completion(corpus[i])};
    if (s.completion.size() < 2) throw Error("corpus sentence " + std::to_string(i) + " is empty");
    if (1 + s.completion.size() > context_length) {
      throw lm::ContextOverflowError("corpus sentence " + std::to_string(i) + " has " +
                                     std::to_string(1 + s.completion.size()) +
                                     " tokens > context length " +
                                     std::to_string(context_length));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

lm::ModelParams pretrain(std::span<const std::string> corpus, const lm::Vocabulary& vocab,
                         const lm::ModelConfig& config, const PretrainOptions& options) {
  if (corpus.empty()) throw UsageError("pretrain: empty corpus");
  if (options.steps < 1) throw UsageError("pretrain: steps must be >= 1");
  if (options.batch_size < 1) throw UsageError("pretrain: batch size must be >= 1");
  if (!(options.learning_rate >= 0.0) || !std::isfinite(options.learning_rate)) {
    throw UsageError("pretrain: learning rate must be finite and >= 0");
  }
  if (config.vocab_size != vocab.size()) {
    throw UsageError("pretrain: model vocab_size " + std::to_string(config.vocab_size) +
                     " != vocabulary size " + std::to_string(vocab.size()));
  }
  config.validate();
  const auto sentences = encode_corpus(corpus, vocab, config.context_length);

  lm::ModelParams params = lm::init_params(config);
  numerics::AdamConfig adam_cfg;
  adam_cfg.learning_rate = options.learning_rate;
  numerics::AdamState adam(params.weights, adam_cfg);

  std::vector<std::size_t> order(sentences.size());
  std::size_t cursor = order.size();
  std::uint64_t pass = 0;
  for (std::size_t step = 0; step < options.steps; ++step) {
    numerics::Tape tape;
    lm::BoundModel model(tape, params, true);
    std::vector<numerics::Var> lps;
    double tokens = 0.0;
    for (std::size_t k = 0; k < options.batch_size; ++k) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(numerics::derive_seed(options.seed, {pass++}));
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const auto& s = sentences[order[cursor++]];
      lps.push_back(model.sequence_logprob(s.prompt, s.completion));
      tokens += static_cast<double>(s.completion.size());
    }
    const numerics::Var loss = numerics::add_n(lps) * (-1.0 / tokens);
    const double value = tape.scalar(loss);
    if (!std::isfinite(value)) {
      throw Error("pretrain: non-finite loss at step " + std::to_string(step));
    }
    tape.backward(loss);
    numerics::ParameterSet grads = params.weights.zeros_like();
    model.accumulate_grads(grads);
    numerics::adam_step(params.weights, grads, adam);
    if (options.on_step) options.on_step(step, value);
  }
  return params;
}

double corpus_perplexity(const lm::ModelParams& params, const lm::Vocabulary& vocab,
                         std::span<const std::string> corpus) {
  if (corpus.empty()) throw UsageError("corpus_perplexity: empty corpus");
  const auto sentences = encode_corpus(corpus, vocab, params.config.context_length);
  lm::Scorer scorer(params);
  double nll = 0.0;
  double tokens = 0.0;
  for (const auto& s : sentences) {
    nll -= scorer.logprob(s.prompt, s.completion);
    tokens += static_cast<double>(s.completion.size());
  }
  return std::exp(nll / tokens);
}

}  // namespace prefalign::trainer
