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

#include "prefalign/prefloss/losses.hpp"

#include <cctype>
#include <cmath>

namespace prefalign::prefloss {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view to_string(LossVariant v) {
  switch (v) {
    case LossVariant::kDpo: return "DPO";
    case LossVariant::kIpo: return "IPO";
    case LossVariant::kSlic: return "SLIC";
    case LossVariant::kKto: return "KTO";
  }
  return "?";
}

std::string_view to_string(ZrefPolicy p) {
  return p == ZrefPolicy::kZero ? "ZERO" : "BATCH_KL";
}

std::string_view to_string(SlicTarget t) {
  return t == SlicTarget::kChosen ? "CHOSEN" : "EXTERNAL_TARGET";
}

LossVariant parse_loss_variant(std::string_view s) {
  const std::string l = lower(s);
  if (l == "dpo") return LossVariant::kDpo;
  if (l == "ipo") return LossVariant::kIpo;
  if (l == "slic") return LossVariant::kSlic;
  if (l == "kto") return LossVariant::kKto;
  throw UsageError("unknown loss variant '" + std::string(s) + "' (expected dpo|ipo|slic|kto)");
}

ZrefPolicy parse_zref_policy(std::string_view s) {
  const std::string l = lower(s);
  if (l == "zero") return ZrefPolicy::kZero;
  if (l == "batch_kl") return ZrefPolicy::kBatchKl;
  throw UsageError("unknown z_ref policy '" + std::string(s) + "' (expected zero|batch_kl)");
}

SlicTarget parse_slic_target(std::string_view s) {
  const std::string l = lower(s);
  if (l == "chosen") return SlicTarget::kChosen;
  if (l == "external_target") return SlicTarget::kExternalTarget;
  throw UsageError("unknown SLiC target '" + std::string(s) +
                   "' (expected chosen|external_target)");
}

void LossConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw UsageError("loss config: beta must be > 0");
  if (variant == LossVariant::kSlic) {
    if (!delta) throw UsageError("loss config: SLiC requires --delta");
    if (!(*delta > 0.0) || !std::isfinite(*delta)) {
      throw UsageError("loss config: delta must be > 0");
    }
  } else if (delta) {
    throw UsageError("loss config: delta only applies to the SLiC variant");
  }
  if (!(w_desirable > 0.0) || !(w_undesirable > 0.0)) {
    throw UsageError("loss config: KTO weights must be > 0");
  }
}

double batch_kl_zref(std::span<const LogProbPair> mismatched, double beta) {
  if (mismatched.empty()) return 0.0;
  double s = 0.0;
  for (const auto& p : mismatched) s += implicit_reward(p.policy, p.ref, beta);
  return std::max(0.0, s / static_cast<double>(mismatched.size()));
}

}  // namespace prefalign::prefloss
