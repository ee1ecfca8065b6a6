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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "support/oracles.hpp"

namespace prefalign::prefloss {
namespace {

using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

LogProbQuad quad_from(double dw, double dl) { return {dw - 3.0, dl - 4.0, -3.0, -4.0}; }

struct RandomBatch {
  std::vector<LogProbQuad> quads;
  std::vector<oracle::Quad> plain;
  std::vector<double> reg;
};

RandomBatch random_batch(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(1, 8);
  std::uniform_real_distribution<double> lp(-30.0, -0.5);
  RandomBatch b;
  const int n = size(rng);
  for (int i = 0; i < n; ++i) {
    const LogProbQuad q{lp(rng), lp(rng), lp(rng), lp(rng)};
    b.quads.push_back(q);
    b.plain.push_back({q.policy_chosen, q.policy_rejected, q.ref_chosen, q.ref_rejected});
    b.reg.push_back(lp(rng));
  }
  return b;
}

// Places every log-probability of the batch on the tape as a variable.
std::vector<Quad<Var>> on_tape(Tape& t, const std::vector<LogProbQuad>& quads) {
  std::vector<Quad<Var>> out;
  for (const auto& q : quads) {
    out.push_back({t.variable(Tensor::scalar(q.policy_chosen)),
                   t.variable(Tensor::scalar(q.policy_rejected)),
                   t.variable(Tensor::scalar(q.ref_chosen)),
                   t.variable(Tensor::scalar(q.ref_rejected))});
  }
  return out;
}

double grad_of(const Tape& t, Var v) { return t.grad(v).data[0]; }

TEST(ImplicitReward, Examples) {
  EXPECT_EQ(implicit_reward(-4.0, -4.0, 0.1), 0.0);
  EXPECT_NEAR(implicit_reward(-3.0, -5.0, 0.1), 0.2, 1e-15);
}

TEST(DpoLoss, PolicyEqualsReference) {
  const std::vector<LogProbQuad> b = {quad_from(0, 0), quad_from(0, 0), quad_from(0, 0)};
  const auto r = dpo_loss(b, 0.1);
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-15);
  for (double m : r.margins) EXPECT_EQ(m, 0.0);
}

TEST(DpoLoss, WorkedExample) {
  const auto r = dpo_loss(std::vector<LogProbQuad>{quad_from(2.0, -1.0)}, 0.1);
  EXPECT_NEAR(r.margins[0], 0.3, 1e-15);
  EXPECT_NEAR(r.loss, 0.554355244468527, 1e-12);
}

TEST(DpoLoss, SaturationLimits) {
  const double big = dpo_loss(std::vector<LogProbQuad>{quad_from(500.0, 0.0)}, 0.1).loss;
  EXPECT_GT(big, 0.0);
  EXPECT_LT(big, 1e-21);
  const double small = dpo_loss(std::vector<LogProbQuad>{quad_from(-500.0, 0.0)}, 0.1).loss;
  EXPECT_NEAR(small, 50.0, 1e-12);
}

TEST(DpoLoss, StrictlyDecreasingInMargin) {
  double prev = INFINITY;
  for (double m : {-5.0, -1.0, 0.0, 1.0, 5.0}) {
    const double l = dpo_loss(std::vector<LogProbQuad>{quad_from(m, 0.0)}, 1.0).loss;
    EXPECT_LT(l, prev) << "m=" << m;
    EXPECT_GT(l, 0.0);
    prev = l;
  }
}

TEST(DpoLoss, GradientSigns) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const RandomBatch b = random_batch(rng);
    Tape t;
    const auto q = on_tape(t, b.quads);
    const Var loss = dpo_loss(q, 0.3).loss;
    t.backward(loss);
    for (const auto& x : q) {
      EXPECT_LT(grad_of(t, x.policy_chosen), 0.0);
      EXPECT_GT(grad_of(t, x.policy_rejected), 0.0);
    }
  }
}

TEST(IpoLoss, Examples) {
  EXPECT_NEAR(ipo_loss(std::vector<LogProbQuad>{quad_from(0, 0), quad_from(0, 0)}, 0.1), 25.0,
              1e-12);
  EXPECT_EQ(ipo_loss(std::vector<LogProbQuad>{quad_from(1.0, 0.0)}, 0.5), 0.0);
  EXPECT_EQ(ipo_loss(std::vector<LogProbQuad>{{5.0, 0.0, 0.0, 0.0}}, 0.1), 0.0);
}

TEST(IpoLoss, StationaryPoint) {
  for (double beta : {0.01, 0.1, 0.5, 0.7}) {
    Tape t;
    const auto q = on_tape(t, {{1.0 / (2.0 * beta), 0.0, 0.0, 0.0}});
    const Var loss = ipo_loss(q, beta);
    t.backward(loss);
    EXPECT_LT(std::abs(grad_of(t, q[0].policy_chosen)), 1e-10);
    EXPECT_LT(std::abs(grad_of(t, q[0].policy_rejected)), 1e-10);
  }
}

TEST(SlicLoss, Examples) {
  const std::vector<double> zero = {0.0};
  EXPECT_EQ(slic_loss(std::vector<LogProbQuad>{{-5.0, -7.0, 0.0, 0.0}}, 1.0, 0.5, zero), 0.0);
  EXPECT_EQ(slic_loss(std::vector<LogProbQuad>{{-7.0, -5.0, 0.0, 0.0}}, 1.0, 0.5, zero), 3.0);
  EXPECT_EQ(slic_loss(std::vector<LogProbQuad>{{-5.0, -7.0, 0.0, 0.0}}, 1.0, 0.5,
                      std::vector<double>{-5.0}),
            2.5);
}

TEST(SlicLoss, IgnoresReferenceLogProbs) {
  const std::vector<double> reg = {-2.0};
  EXPECT_EQ(slic_loss(std::vector<LogProbQuad>{{-7.0, -5.0, -1.0, -9.0}}, 1.0, 0.5, reg),
            slic_loss(std::vector<LogProbQuad>{{-7.0, -5.0, -30.0, 4.0}}, 1.0, 0.5, reg));
}

TEST(SlicLoss, HingeSubgradientIsZeroAboveDelta) {
  Tape t;
  const auto q = on_tape(t, {{-5.0, -7.0, 0.0, 0.0}});
  const std::vector<Var> reg = {t.variable(Tensor::scalar(-4.0))};
  const Var loss = slic_loss(q, 1.0, 0.5, reg);
  t.backward(loss);
  EXPECT_EQ(grad_of(t, q[0].policy_chosen), 0.0);
  EXPECT_EQ(grad_of(t, q[0].policy_rejected), 0.0);
  EXPECT_EQ(grad_of(t, reg[0]), -0.5);
}

TEST(SlicLoss, RegularizerCountMustMatch) {
  EXPECT_THROW(slic_loss(std::vector<LogProbQuad>{quad_from(0, 0)}, 1.0, 0.5,
                         std::vector<double>{}),
               Error);
}

TEST(KtoLoss, PolicyEqualsReference) {
  const std::vector<LogProbPair> d = {{-3.0, -3.0}, {-1.0, -1.0}};
  const std::vector<LogProbPair> u = {{-2.0, -2.0}};
  EXPECT_EQ(kto_loss(d, u, LossConfig{}, 0.0), 0.5);
}

TEST(KtoLoss, SaturationLimits) {
  LossConfig c;
  c.beta = 1.0;
  c.w_undesirable = 2.0;
  EXPECT_LT(kto_loss(std::vector<LogProbPair>{{500.0, 0.0}}, {}, c, 0.0), 1e-200);
  EXPECT_NEAR(kto_loss({}, std::vector<LogProbPair>{{500.0, 0.0}}, c, 0.0), 2.0, 1e-12);
}

TEST(KtoLoss, BatchKlReferenceExample) {
  // Every implicit reward is 0.1 * 4 = 0.4.
  const std::vector<LogProbPair> mismatched = {{-1.0, -5.0}, {-3.0, -7.0}};
  const double z = batch_kl_zref(mismatched, 0.1);
  EXPECT_NEAR(z, 0.4, 1e-15);
  LossConfig c;
  c.w_desirable = 1.0;
  c.w_undesirable = 3.0;
  const std::vector<LogProbPair> d = {{-2.0, -6.0}, {-6.0, -10.0}};
  const std::vector<LogProbPair> u = {{-4.0, -8.0}, {-5.0, -9.0}};
  EXPECT_NEAR(kto_loss(d, u, c, z), 0.5 * 2.0, 1e-12);
}

TEST(KtoLoss, BatchKlIsClampedAtZero) {
  EXPECT_EQ(batch_kl_zref(std::vector<LogProbPair>{{-9.0, -1.0}}, 0.5), 0.0);
  EXPECT_EQ(batch_kl_zref({}, 0.5), 0.0);
}

TEST(KtoLoss, ReferenceRewardIsAGradientConstant) {
  LossConfig c;
  c.beta = 0.4;
  c.w_desirable = 1.5;
  c.w_undesirable = 0.5;
  const double p = -3.0, r = -4.5;
  for (double z : {0.0, 0.3, 1.2}) {
    Tape t;
    const std::vector<Pair<Var>> d = {{t.variable(Tensor::scalar(p)), t.constant(r)}};
    const std::vector<Pair<Var>> u = {{t.variable(Tensor::scalar(r)), t.constant(p)}};
    const Var loss = kto_loss(d, u, c, z);
    t.backward(loss);
    // Partial derivatives with z held fixed, halved by the mean over two terms.
    const double sd = oracle::logistic(c.beta * (p - r) - z);
    const double su = oracle::logistic(z - c.beta * (r - p));
    EXPECT_NEAR(grad_of(t, d[0].policy), -c.w_desirable * c.beta * sd * (1 - sd) / 2, 1e-15);
    EXPECT_NEAR(grad_of(t, u[0].policy), c.w_undesirable * c.beta * su * (1 - su) / 2, 1e-15);
  }
  const std::vector<LogProbPair> d = {{p, r}};
  EXPECT_NE(kto_loss(d, {}, c, 0.0), kto_loss(d, {}, c, 0.5));
}

TEST(Losses, EmptyBatchesThrow) {
  const std::vector<LogProbQuad> none;
  EXPECT_THROW(dpo_loss(none, 0.1), Error);
  EXPECT_THROW(ipo_loss(none, 0.1), Error);
  EXPECT_THROW(slic_loss(none, 1.0, 0.1, std::vector<double>{}), Error);
  EXPECT_THROW(kto_loss(std::vector<LogProbPair>{}, std::vector<LogProbPair>{}, LossConfig{}, 0.0),
               Error);
}

TEST(Losses, ShiftInvariance) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> shift(-20.0, 20.0);
  for (int trial = 0; trial < 100; ++trial) {
    const RandomBatch b = random_batch(rng);
    std::vector<LogProbQuad> shifted = b.quads;
    const double c = shift(rng);
    for (auto& q : shifted) {
      q.policy_chosen += c;
      q.policy_rejected += c;
      q.ref_chosen += c;
      q.ref_rejected += c;
    }
    EXPECT_NEAR(dpo_loss(b.quads, 0.1).loss, dpo_loss(shifted, 0.1).loss, 1e-10);
    EXPECT_NEAR(ipo_loss(b.quads, 0.1), ipo_loss(shifted, 0.1), 1e-10);
  }
}

TEST(Losses, MatchStraightLineOracleOnRandomBatches) {
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> beta_d(0.01, 0.7);
  std::uniform_real_distribution<double> w(0.5, 2.0);
  std::uniform_real_distribution<double> z(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const RandomBatch b = random_batch(rng);
    const double beta = beta_d(rng);
    const double delta = 2.0 * z(rng);
    LossConfig c;
    c.beta = beta;
    c.w_desirable = w(rng);
    c.w_undesirable = w(rng);
    const double zref = z(rng);
    std::vector<LogProbPair> d, u;
    std::vector<std::pair<double, double>> od, ou;
    for (const auto& q : b.quads) {
      d.push_back({q.policy_chosen, q.ref_chosen});
      u.push_back({q.policy_rejected, q.ref_rejected});
      od.emplace_back(q.policy_chosen, q.ref_chosen);
      ou.emplace_back(q.policy_rejected, q.ref_rejected);
    }
    const double dpo = oracle::dpo(b.plain, beta);
    const double ipo = oracle::ipo(b.plain, beta);
    const double slic = oracle::slic(b.plain, delta, beta, b.reg);
    const double kto = oracle::kto(od, ou, beta, c.w_desirable, c.w_undesirable, zref);

    EXPECT_NEAR(dpo_loss(b.quads, beta).loss, dpo, 1e-12);
    EXPECT_NEAR(ipo_loss(b.quads, beta), ipo, 1e-12 * std::max(1.0, ipo));
    EXPECT_NEAR(slic_loss(b.quads, delta, beta, b.reg), slic, 1e-12);
    EXPECT_NEAR(kto_loss(d, u, c, zref), kto, 1e-12);

    // The tape instantiation gives the same values.
    Tape t;
    const auto q = on_tape(t, b.quads);
    std::vector<Var> reg;
    for (double r : b.reg) reg.push_back(t.constant(r));
    std::vector<Pair<Var>> vd, vu;
    for (const auto& x : q) {
      vd.push_back({x.policy_chosen, x.ref_chosen});
      vu.push_back({x.policy_rejected, x.ref_rejected});
    }
    EXPECT_NEAR(t.scalar(dpo_loss(q, beta).loss), dpo, 1e-12);
    EXPECT_NEAR(t.scalar(ipo_loss(q, beta)), ipo, 1e-12 * std::max(1.0, ipo));
    EXPECT_NEAR(t.scalar(slic_loss(q, delta, beta, reg)), slic, 1e-12);
    EXPECT_NEAR(t.scalar(kto_loss(vd, vu, c, zref)), kto, 1e-12);
  }
}

TEST(LossConfig, Validation) {
  LossConfig c;
  EXPECT_NO_THROW(c.validate());
  c.beta = 0.0;
  EXPECT_THROW(c.validate(), UsageError);
  c = LossConfig{};
  c.variant = LossVariant::kSlic;
  EXPECT_THROW(c.validate(), UsageError);
  c.delta = 1.0;
  EXPECT_NO_THROW(c.validate());
  c.delta = -1.0;
  EXPECT_THROW(c.validate(), UsageError);
  c = LossConfig{};
  c.delta = 1.0;
  EXPECT_THROW(c.validate(), UsageError);
  c = LossConfig{};
  c.w_undesirable = 0.0;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(LossConfig, NamesRoundTrip) {
  for (auto v : {LossVariant::kDpo, LossVariant::kIpo, LossVariant::kSlic, LossVariant::kKto}) {
    EXPECT_EQ(parse_loss_variant(to_string(v)), v);
  }
  for (auto p : {ZrefPolicy::kZero, ZrefPolicy::kBatchKl}) {
    EXPECT_EQ(parse_zref_policy(to_string(p)), p);
  }
  for (auto s : {SlicTarget::kChosen, SlicTarget::kExternalTarget}) {
    EXPECT_EQ(parse_slic_target(to_string(s)), s);
  }
  EXPECT_EQ(parse_loss_variant("ipo"), LossVariant::kIpo);
  EXPECT_THROW(parse_loss_variant("ppo"), UsageError);
  EXPECT_THROW(parse_zref_policy("mean"), UsageError);
  EXPECT_THROW(parse_slic_target("rejected"), UsageError);
}

}  // namespace
}  // namespace prefalign::prefloss
