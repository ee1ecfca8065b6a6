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

#ifndef PREFALIGN_LM_MODEL_HPP_
#define PREFALIGN_LM_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prefalign/error.hpp"
#include "prefalign/lm/vocabulary.hpp"
#include "prefalign/numerics/tape.hpp"
#include "prefalign/numerics/tensor.hpp"

namespace prefalign::lm {

// Decoder-only transformer hyperparameters. Pre-norm blocks, learned
// absolute positions, GELU feedforward, untied output head.
struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t context_length = 32;
  std::size_t feedforward_dim = 128;
  std::uint64_t seed = 0;

  // Throws UsageError on zero sizes or embed_dim % num_heads != 0.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct BlockShape {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

// Parameter block names and shapes, in storage order.
std::vector<BlockShape> parameter_layout(const ModelConfig& config);

struct ModelParams {
  ModelConfig config;
  numerics::ParameterSet weights;
};

// Seeded from config.seed.
ModelParams init_params(const ModelConfig& config);

class ContextOverflowError : public Error {
 public:
  using Error::Error;
};

// Model weights placed on a tape, as trainable variables or as constants.
class BoundModel {
 public:
  BoundModel(numerics::Tape& tape, const ModelParams& params, bool trainable);

  const ModelConfig& config() const { return config_; }
  numerics::Tape& tape() const { return *tape_; }

  // [ids.size() x vocab_size] next-token logits.
  numerics::Var logits(std::span<const TokenId> ids) const;

  // Sum over completion tokens of ln p(token | everything before it).
  // Prompt tokens only condition. Throws ContextOverflowError when
  // |prompt| + |completion| > context_length and Error on an empty prompt
  // or completion.
  numerics::Var sequence_logprob(std::span<const TokenId> prompt,
                                 std::span<const TokenId> completion) const;

  // Adds the gradients recorded on the tape into grads (same layout as the
  // bound weights). Call after tape().backward().
  void accumulate_grads(numerics::ParameterSet& grads) const;

 private:
  numerics::Tape* tape_;
  ModelConfig config_;
  std::vector<numerics::Var> blocks_;
};

// Evaluation-mode scorer: binds the weights once to a non-recording tape and
// reuses the binding across calls. Not thread-safe; use one per thread.
class Scorer {
 public:
  explicit Scorer(const ModelParams& params);

  const ModelConfig& config() const { return model_.config(); }

  double logprob(std::span<const TokenId> prompt, std::span<const TokenId> completion);
  // [ids.size() x vocab_size] log-softmax of the next-token distribution at
  // every position.
  numerics::Tensor next_token_logprobs(std::span<const TokenId> ids);

 private:
  numerics::Tape tape_;
  BoundModel model_;
  std::size_t mark_;
};

double sequence_logprob(const ModelParams& params, std::span<const TokenId> prompt,
                        std::span<const TokenId> completion);

struct SampleOptions {
  std::size_t max_new_tokens = 16;
  double temperature = 1.0;
  // Argmax decoding (lowest index on ties); the temperature -> 0+ limit.
  bool greedy = false;
  std::optional<TokenId> eos;
  std::uint64_t seed = 0;
};

// Ancestral sampling of a continuation of prompt. Stops after emitting eos
// (included in the result), after max_new_tokens, or when the context is
// full. Identical params, prompt and options give identical output.
TokenSequence sample(const ModelParams& params, std::span<const TokenId> prompt,
                     const SampleOptions& options);
// Same, reusing an existing scorer's binding.
TokenSequence sample(Scorer& scorer, std::span<const TokenId> prompt,
                     const SampleOptions& options);

TokenSequence sample(const ModelParams& params, std::span<const TokenId> prompt,
                     std::size_t max_new_tokens, double temperature, std::uint64_t seed,
                     std::optional<TokenId> eos = std::nullopt);

}  // namespace prefalign::lm

#endif  // PREFALIGN_LM_MODEL_HPP_
