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

#ifndef PREFALIGN_PREFLOSS_LOSSES_HPP_
#define PREFALIGN_PREFLOSS_LOSSES_HPP_

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefalign/error.hpp"
#include "prefalign/numerics/stable.hpp"
#include "prefalign/numerics/tape.hpp"

namespace prefalign::prefloss {

enum class LossVariant { kDpo, kIpo, kSlic, kKto };
// Reference reward for KTO: zero, or max(0, mean implicit reward over
// mismatched prompt/completion pairs of the batch). Either way it is a
// constant with respect to gradients.
enum class ZrefPolicy { kZero, kBatchKl };
// Sequence whose log-likelihood SLiC regularises: the chosen completion, or
// an explicit per-example target.
enum class SlicTarget { kChosen, kExternalTarget };

std::string_view to_string(LossVariant v);  // "DPO", "IPO", "SLIC", "KTO"
std::string_view to_string(ZrefPolicy p);   // "ZERO", "BATCH_KL"
std::string_view to_string(SlicTarget t);   // "CHOSEN", "EXTERNAL_TARGET"
// Case-insensitive.
LossVariant parse_loss_variant(std::string_view s);
ZrefPolicy parse_zref_policy(std::string_view s);
SlicTarget parse_slic_target(std::string_view s);

struct LossConfig {
  LossVariant variant = LossVariant::kDpo;
  double beta = 0.1;
  std::optional<double> delta;  // SLiC hinge margin; set iff variant == kSlic
  double w_desirable = 1.0;
  double w_undesirable = 1.0;
  ZrefPolicy zref_policy = ZrefPolicy::kBatchKl;
  SlicTarget slic_target = SlicTarget::kChosen;

  // Throws UsageError when an invariant is violated.
  void validate() const;
};

// Sequence log-probabilities of one preference example under the policy and
// the reference. S is double or numerics::Var.
template <class S>
struct Quad {
  S policy_chosen;
  S policy_rejected;
  S ref_chosen;
  S ref_rejected;
};
using LogProbQuad = Quad<double>;

// (policy, reference) log-probabilities of a single completion.
template <class S>
struct Pair {
  S policy;
  S ref;
};
using LogProbPair = Pair<double>;

namespace detail {

inline double square(double x) { return x * x; }
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
using numerics::log_sigmoid;
using numerics::relu;
using numerics::sigmoid;
using numerics::square;

template <class S>
S mean_of(const std::vector<S>& xs) {
  if constexpr (std::is_same_v<S, double>) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  } else {
    return numerics::mean(xs);
  }
}

template <class S>
void require_nonempty(std::span<const S> batch, const char* what) {
  if (batch.empty()) throw Error(std::string(what) + ": empty batch");
}

}  // namespace detail

// beta * (policy_lp - ref_lp)
template <class S>
S implicit_reward(S policy_lp, S ref_lp, double beta) {
  return beta * (policy_lp - ref_lp);
}

// beta * ((pc - rc) - (pr - rr)): the difference of implicit rewards.
template <class S>
S margin(const Quad<S>& q, double beta) {
  return beta * ((q.policy_chosen - q.ref_chosen) - (q.policy_rejected - q.ref_rejected));
}

// Log-ratio gap h = (pc - rc) - (pr - rr).
template <class S>
S log_ratio_gap(const Quad<S>& q) {
  return (q.policy_chosen - q.ref_chosen) - (q.policy_rejected - q.ref_rejected);
}

template <class S>
struct DpoResult {
  S loss;
  std::vector<S> margins;
};

// Mean of -ln sigma(margin) over the batch.
template <class S>
DpoResult<S> dpo_loss(std::span<const Quad<S>> batch, double beta) {
  detail::require_nonempty(batch, "dpo_loss");
  std::vector<S> terms;
  std::vector<S> margins;
  terms.reserve(batch.size());
  margins.reserve(batch.size());
  for (const auto& q : batch) {
    const S m = margin(q, beta);
    margins.push_back(m);
    terms.push_back(-detail::log_sigmoid(m));
  }
  return {detail::mean_of(terms), std::move(margins)};
}

// Mean of (h - 1/(2 beta))^2, minimised.
template <class S>
S ipo_loss(std::span<const Quad<S>> batch, double beta) {
  detail::require_nonempty(batch, "ipo_loss");
  const double target = 1.0 / (2.0 * beta);
  std::vector<S> terms;
  terms.reserve(batch.size());
  for (const auto& q : batch) terms.push_back(detail::square(log_ratio_gap(q) - target));
  return detail::mean_of(terms);
}

// Mean of max(0, delta - pc + pr) - beta * regularizer_lp. Uses only policy
// log-probabilities; regularizer_lp[i] is ln pi(y_ref | x) of example i.
template <class S>
S slic_loss(std::span<const Quad<S>> batch, double delta, double beta,
            std::span<const S> regularizer_lp) {
  detail::require_nonempty(batch, "slic_loss");
  if (regularizer_lp.size() != batch.size()) {
    throw Error("slic_loss: one regulariser log-probability per example is required");
  }
  std::vector<S> terms;
  terms.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& q = batch[i];
    const S hinge = detail::relu(delta - q.policy_chosen + q.policy_rejected);
    terms.push_back(hinge - beta * regularizer_lp[i]);
  }
  return detail::mean_of(terms);
}

// max(0, mean over pairs of beta * (policy - ref)). Plain value: callers feed
// it to kto_loss as a constant.
double batch_kl_zref(std::span<const LogProbPair> mismatched, double beta);

// Mean over all examples of w(y) * (1 - v), v = sigma(r - z_ref) for
// desirable and sigma(z_ref - r) for undesirable completions, r the implicit
// reward. z_ref enters as a constant.
template <class S>
S kto_loss(std::span<const Pair<S>> desirable, std::span<const Pair<S>> undesirable,
           const LossConfig& config, double z_ref) {
  if (desirable.empty() && undesirable.empty()) throw Error("kto_loss: empty batch");
  std::vector<S> terms;
  terms.reserve(desirable.size() + undesirable.size());
  for (const auto& p : desirable) {
    const S r = implicit_reward(p.policy, p.ref, config.beta);
    terms.push_back(config.w_desirable * (1.0 - detail::sigmoid(r - z_ref)));
  }
  for (const auto& p : undesirable) {
    const S r = implicit_reward(p.policy, p.ref, config.beta);
    terms.push_back(config.w_undesirable * (1.0 - detail::sigmoid(z_ref - r)));
  }
  return detail::mean_of(terms);
}

template <class S>
DpoResult<S> dpo_loss(const std::vector<Quad<S>>& batch, double beta) {
  return dpo_loss(std::span<const Quad<S>>(batch), beta);
}

template <class S>
S ipo_loss(const std::vector<Quad<S>>& batch, double beta) {
  return ipo_loss(std::span<const Quad<S>>(batch), beta);
}

template <class S>
S slic_loss(const std::vector<Quad<S>>& batch, double delta, double beta,
            const std::vector<S>& regularizer_lp) {
  return slic_loss(std::span<const Quad<S>>(batch), delta, beta,
                   std::span<const S>(regularizer_lp));
}

template <class S>
S kto_loss(const std::vector<Pair<S>>& desirable, const std::vector<Pair<S>>& undesirable,
           const LossConfig& config, double z_ref) {
  return kto_loss(std::span<const Pair<S>>(desirable), std::span<const Pair<S>>(undesirable),
                  config, z_ref);
}

}  // namespace prefalign::prefloss

#endif  // PREFALIGN_PREFLOSS_LOSSES_HPP_
