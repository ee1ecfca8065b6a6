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

#include "prefalign/numerics/adam.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "prefalign/error.hpp"
#include "prefalign/numerics/gradcheck.hpp"

namespace prefalign::numerics {
namespace {

ParameterSet make(double v) {
  ParameterSet p;
  p.add("w", Tensor(2, 3, v));
  p.add("b", Tensor(1, 3, v));
  return p;
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet p = make(0.5);
  const ParameterSet g = make(1.0);
  AdamState s(p, AdamConfig{1e-3, 0.9, 0.999, 1e-8});
  adam_step(p, g, s);
  EXPECT_EQ(s.step_count, 1u);
  for (const auto& b : p.blocks()) {
    for (double v : b.value.data) EXPECT_NEAR(v - 0.5, -1e-3, 1e-10);
  }
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  ParameterSet p = make(0.25);
  AdamState s(p, AdamConfig{});
  adam_step(p, make(2.0), s);
  const ParameterSet after_first = p;
  const double m_before = s.first_moment.at(0);
  const double v_before = s.second_moment.at(0);
  // A zero gradient still moves params through the decaying first moment;
  // with fresh moments it does not move them at all.
  ParameterSet q = make(0.25);
  AdamState fresh(q, AdamConfig{});
  adam_step(q, make(0.0), fresh);
  EXPECT_TRUE(q.bit_identical(make(0.25)));
  adam_step(p, make(0.0), s);
  EXPECT_DOUBLE_EQ(s.first_moment.at(0), 0.9 * m_before);
  EXPECT_DOUBLE_EQ(s.second_moment.at(0), 0.999 * v_before);
  (void)after_first;
}

TEST(Adam, TwoStepsMatchHandRecurrence) {
  const double lr = 1e-2, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.37, theta0 = -1.2;
  ParameterSet p;
  p.add("x", Tensor::scalar(theta0));
  ParameterSet grad;
  grad.add("x", Tensor::scalar(g));
  AdamState s(p, AdamConfig{lr, b1, b2, eps});
  adam_step(p, grad, s);
  adam_step(p, grad, s);

  long double theta = theta0, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * (long double)g * g;
    const long double mh = m / (1 - std::pow((long double)b1, t));
    const long double vh = v / (1 - std::pow((long double)b2, t));
    theta -= lr * mh / (std::sqrt(vh) + eps);
  }
  EXPECT_NEAR(p.at(0), static_cast<double>(theta), 1e-15);
  EXPECT_EQ(s.step_count, 2u);
}

TEST(Adam, ZeroLearningRateIsIdentity) {
  ParameterSet p = make(0.75);
  AdamState s(p, AdamConfig{0.0, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 3; ++i) adam_step(p, make(123.0 * (i + 1)), s);
  EXPECT_TRUE(p.bit_identical(make(0.75)));
}

TEST(Adam, ShapeMismatchThrows) {
  ParameterSet p = make(0.0);
  ParameterSet g;
  g.add("w", Tensor(2, 3));
  AdamState s(p, AdamConfig{});
  EXPECT_THROW(adam_step(p, g, s), Error);
}

TEST(Adam, NonFiniteGradientNamesBlockAndLeavesStateUntouched) {
  ParameterSet p = make(0.5);
  ParameterSet g = make(1.0);
  g.block(1).value.data[2] = std::numeric_limits<double>::infinity();
  AdamState s(p, AdamConfig{});
  try {
    adam_step(p, g, s);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos) << e.what();
  }
  EXPECT_EQ(s.step_count, 0u);
  EXPECT_TRUE(p.bit_identical(make(0.5)));
  EXPECT_TRUE(s.first_moment.bit_identical(make(0.0)));
}

TEST(ClipGradNorm, RescalesToMaxNorm) {
  ParameterSet g;
  g.add("a", Tensor::scalar(3.0));
  g.add("b", Tensor::scalar(4.0));
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 1.0), 5.0);
  EXPECT_NEAR(l2_norm(g), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 10.0), l2_norm(g));
}

// ---- finite-difference checker ----

TEST(FiniteDiff, QuadraticIsExact) {
  ParameterSet p;
  p.add("t", Tensor(10, 20));
  for (std::size_t i = 0; i < p.num_scalars(); ++i) p.at(i) = std::sin(0.37 * i) * 3.0;
  auto loss = [](const ParameterSet& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < q.num_scalars(); ++i) s += 0.5 * q.at(i) * q.at(i);
    return s;
  };
  auto grad = [&](const ParameterSet& q, ParameterSet& g) {
    for (std::size_t i = 0; i < q.num_scalars(); ++i) g.at(i) = q.at(i);
    return loss(q);
  };
  const auto r = finite_diff_check(loss, grad, p, GradCheckOptions{});
  EXPECT_EQ(r.coordinates.size(), 100u);
  EXPECT_LT(r.max_relative_error, 1e-8);
  EXPECT_TRUE(r.passed);
}

TEST(FiniteDiff, ConstantLossHasZeroDifferences) {
  ParameterSet p = make(1.0);
  auto loss = [](const ParameterSet&) { return 4.0; };
  auto grad = [](const ParameterSet&, ParameterSet&) { return 4.0; };
  const auto r = finite_diff_check(loss, grad, p, GradCheckOptions{});
  for (const auto& c : r.coordinates) {
    EXPECT_EQ(c.analytic, 0.0);
    EXPECT_EQ(c.numeric, 0.0);
  }
  EXPECT_EQ(r.max_relative_error, 0.0);
}

TEST(FiniteDiff, WrongGradientIsReported) {
  ParameterSet p = make(1.0);
  auto loss = [](const ParameterSet& q) { return q.at(0) * q.at(0); };
  auto grad = [](const ParameterSet& q, ParameterSet& g) {
    g.at(0) = q.at(0);  // should be 2x
    return q.at(0) * q.at(0);
  };
  const auto r = finite_diff_check(loss, grad, p, GradCheckOptions{});
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.worst.flat_index, 0u);
  EXPECT_EQ(r.worst.block, "w");
}

TEST(FiniteDiff, NonDeterministicLossThrows) {
  ParameterSet p = make(1.0);
  int calls = 0;
  auto loss = [&](const ParameterSet&) { return static_cast<double>(++calls); };
  auto grad = [](const ParameterSet&, ParameterSet&) { return 0.0; };
  EXPECT_THROW(finite_diff_check(loss, grad, p, GradCheckOptions{}), Error);
}

}  // namespace
}  // namespace prefalign::numerics
