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

#include "prefalign/lm/model.hpp"

#include <cmath>
#include <random>

namespace prefalign::lm {

namespace nm = prefalign::numerics;

namespace {

// Blocks per transformer layer, in layout order:
// ln1.gain ln1.bias wq wk wv wo ln2.gain ln2.bias w1 b1 w2 b2
constexpr std::size_t kPerLayer = 12;
constexpr std::size_t kLeading = 2;  // tok_embed, pos_embed

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size == 0 || embed_dim == 0 || num_layers == 0 || num_heads == 0 ||
      context_length == 0 || feedforward_dim == 0) {
    throw UsageError("model config: all sizes must be positive");
  }
  if (embed_dim % num_heads != 0) {
    throw UsageError("model config: embed_dim " + std::to_string(embed_dim) +
                     " is not divisible by num_heads " + std::to_string(num_heads));
  }
}

std::vector<BlockShape> parameter_layout(const ModelConfig& c) {
  const std::size_t d = c.embed_dim;
  const std::size_t f = c.feedforward_dim;
  std::vector<BlockShape> out;
  out.push_back({"tok_embed", c.vocab_size, d});
  out.push_back({"pos_embed", c.context_length, d});
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    out.push_back({p + "ln1.gain", 1, d});
    out.push_back({p + "ln1.bias", 1, d});
    out.push_back({p + "attn.wq", d, d});
    out.push_back({p + "attn.wk", d, d});
    out.push_back({p + "attn.wv", d, d});
    out.push_back({p + "attn.wo", d, d});
    out.push_back({p + "ln2.gain", 1, d});
    out.push_back({p + "ln2.bias", 1, d});
    out.push_back({p + "mlp.w1", d, f});
    out.push_back({p + "mlp.b1", 1, f});
    out.push_back({p + "mlp.w2", f, d});
    out.push_back({p + "mlp.b2", 1, d});
  }
  out.push_back({"ln_f.gain", 1, d});
  out.push_back({"ln_f.bias", 1, d});
  out.push_back({"head.w", d, c.vocab_size});
  out.push_back({"head.b", 1, c.vocab_size});
  return out;
}

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const double base_std = 0.08;
  const double resid_std = base_std / std::sqrt(2.0 * static_cast<double>(config.num_layers));
  ModelParams p{config, {}};
  for (const auto& s : parameter_layout(config)) {
    nm::Tensor t(s.rows, s.cols);
    const bool is_gain = s.name.ends_with(".gain");
    const bool is_bias = s.name.ends_with(".bias") || s.name.ends_with(".b1") ||
                         s.name.ends_with(".b2") || s.name == "head.b";
    if (is_gain) {
      t.data.assign(t.size(), 1.0);
    } else if (!is_bias) {
      const bool resid = s.name.ends_with("attn.wo") || s.name.ends_with("mlp.w2");
      std::normal_distribution<double> nd(0.0, resid ? resid_std : base_std);
      for (double& v : t.data) v = nd(rng);
    }
    p.weights.add(s.name, std::move(t));
  }
  return p;
}

BoundModel::BoundModel(nm::Tape& tape, const ModelParams& params, bool trainable)
    : tape_(&tape), config_(params.config) {
  config_.validate();
  const auto layout = parameter_layout(config_);
  if (layout.size() != params.weights.num_blocks()) {
    throw Error("model weights do not match the layout of their config");
  }
  blocks_.reserve(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& b = params.weights.block(i);
    if (b.name != layout[i].name || b.value.rows != layout[i].rows ||
        b.value.cols != layout[i].cols) {
      throw Error("model weight block '" + b.name + "' does not match layout entry '" +
                  layout[i].name + "'");
    }
    blocks_.push_back(trainable ? tape.variable(b.value) : tape.constant(b.value));
  }
}

nm::Var BoundModel::logits(std::span<const TokenId> ids) const {
  const std::size_t n = ids.size();
  if (n == 0) throw Error("logits: empty input");
  if (n > config_.context_length) {
    throw ContextOverflowError("sequence of " + std::to_string(n) +
                               " tokens exceeds context length " +
                               std::to_string(config_.context_length));
  }
  std::vector<int> positions(n);
  for (std::size_t i = 0; i < n; ++i) positions[i] = static_cast<int>(i);
  const std::vector<int> tok(ids.begin(), ids.end());

  nm::Var x = nm::embedding(blocks_[0], tok) + nm::embedding(blocks_[1], positions);
  const std::size_t heads = config_.num_heads;
  const std::size_t dh = config_.embed_dim / heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const nm::Var* w = &blocks_[kLeading + l * kPerLayer];
    nm::Var h = nm::layer_norm(x, w[0], w[1]);
    const nm::Var q = nm::matmul(h, w[2]);
    const nm::Var k = nm::matmul(h, w[3]);
    const nm::Var v = nm::matmul(h, w[4]);
    std::vector<nm::Var> outs;
    outs.reserve(heads);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const nm::Var qh = nm::slice_cols(q, hd * dh, dh);
      const nm::Var kh = nm::slice_cols(k, hd * dh, dh);
      const nm::Var vh = nm::slice_cols(v, hd * dh, dh);
      const nm::Var att = nm::causal_softmax(nm::matmul_transposed(qh, kh) * att_scale);
      outs.push_back(nm::matmul(att, vh));
    }
    x = x + nm::matmul(heads == 1 ? outs[0] : nm::concat_cols(outs), w[5]);

    h = nm::layer_norm(x, w[6], w[7]);
    const nm::Var ff = nm::gelu(nm::add_row(nm::matmul(h, w[8]), w[9]));
    x = x + nm::add_row(nm::matmul(ff, w[10]), w[11]);
  }
  const std::size_t tail = kLeading + config_.num_layers * kPerLayer;
  x = nm::layer_norm(x, blocks_[tail], blocks_[tail + 1]);
  return nm::add_row(nm::matmul(x, blocks_[tail + 2]), blocks_[tail + 3]);
}

nm::Var BoundModel::sequence_logprob(std::span<const TokenId> prompt,
                                     std::span<const TokenId> completion) const {
  if (prompt.empty()) throw Error("sequence_logprob: empty prompt");
  if (completion.empty()) throw Error("sequence_logprob: empty completion");
  const std::size_t total = prompt.size() + completion.size();
  if (total > config_.context_length) {
    throw ContextOverflowError("prompt (" + std::to_string(prompt.size()) +
                               " tokens) + completion (" + std::to_string(completion.size()) +
                               " tokens) exceeds context length " +
                               std::to_string(config_.context_length));
  }
  // The last token never conditions anything, so it is not fed forward.
  TokenSequence input(prompt.begin(), prompt.end());
  input.insert(input.end(), completion.begin(), completion.end() - 1);
  const nm::Var lp = nm::log_softmax_rows(logits(input));
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  cells.reserve(completion.size());
  for (std::size_t t = 0; t < completion.size(); ++t) {
    const TokenId id = completion[t];
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw Error("completion token " + std::to_string(id) + " outside vocabulary");
    }
    cells.emplace_back(prompt.size() - 1 + t, static_cast<std::size_t>(id));
  }
  return nm::pick_sum(lp, cells);
}

void BoundModel::accumulate_grads(nm::ParameterSet& grads) const {
  if (grads.num_blocks() != blocks_.size()) throw Error("accumulate_grads: layout mismatch");
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const nm::Tensor g = tape_->grad(blocks_[i]);
    auto& dst = grads.block(i).value.data;
    if (dst.size() != g.size()) throw Error("accumulate_grads: block size mismatch");
    for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g.data[j];
  }
}

Scorer::Scorer(const ModelParams& params)
    : tape_(false), model_(tape_, params, false), mark_(tape_.size()) {}

double Scorer::logprob(std::span<const TokenId> prompt, std::span<const TokenId> completion) {
  const double v = tape_.scalar(model_.sequence_logprob(prompt, completion));
  tape_.truncate(mark_);
  return v;
}

nm::Tensor Scorer::next_token_logprobs(std::span<const TokenId> ids) {
  nm::Tensor out = tape_.value(nm::log_softmax_rows(model_.logits(ids)));
  tape_.truncate(mark_);
  return out;
}

double sequence_logprob(const ModelParams& params, std::span<const TokenId> prompt,
                        std::span<const TokenId> completion) {
  Scorer s(params);
  return s.logprob(prompt, completion);
}

TokenSequence sample(const ModelParams& params, std::span<const TokenId> prompt,
                     const SampleOptions& options) {
  Scorer scorer(params);
  return sample(scorer, prompt, options);
}

TokenSequence sample(Scorer& scorer, std::span<const TokenId> prompt,
                     const SampleOptions& options) {
  if (prompt.empty()) throw UsageError("sample: empty prompt");
  if (options.max_new_tokens < 1) throw UsageError("sample: max_new_tokens must be >= 1");
  if (!options.greedy && !(options.temperature > 0.0)) {
    throw UsageError("sample: temperature must be positive");
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  TokenSequence seq(prompt.begin(), prompt.end());
  TokenSequence out;
  const std::size_t v = scorer.config().vocab_size;
  std::vector<double> w(v);
  while (out.size() < options.max_new_tokens && seq.size() < scorer.config().context_length) {
    const nm::Tensor lp = scorer.next_token_logprobs(seq);
    const auto last = lp.row(lp.rows - 1);
    TokenId next = 0;
    if (options.greedy) {
      for (std::size_t j = 1; j < v; ++j) {
        if (last[j] > last[static_cast<std::size_t>(next)]) next = static_cast<TokenId>(j);
      }
    } else {
      double m = last[0] / options.temperature;
      for (std::size_t j = 1; j < v; ++j) m = std::max(m, last[j] / options.temperature);
      double total = 0.0;
      for (std::size_t j = 0; j < v; ++j) {
        w[j] = std::exp(last[j] / options.temperature - m);
        total += w[j];
      }
      const double u = unif(rng) * total;
      double acc = 0.0;
      next = static_cast<TokenId>(v - 1);
      for (std::size_t j = 0; j < v; ++j) {
        acc += w[j];
        if (u < acc) {
          next = static_cast<TokenId>(j);
          break;
        }
      }
    }
    out.push_back(next);
    seq.push_back(next);
    if (options.eos && next == *options.eos) break;
  }
  return out;
}

TokenSequence sample(const ModelParams& params, std::span<const TokenId> prompt,
                     std::size_t max_new_tokens, double temperature, std::uint64_t seed,
                     std::optional<TokenId> eos) {
  SampleOptions o;
  o.max_new_tokens = max_new_tokens;
  o.temperature = temperature;
  o.seed = seed;
  o.eos = eos;
  return sample(params, prompt, o);
}

}  // namespace prefalign::lm
