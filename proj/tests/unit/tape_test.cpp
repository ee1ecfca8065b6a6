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

#include "prefalign/numerics/tape.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "prefalign/error.hpp"
#include "prefalign/numerics/gradcheck.hpp"

namespace prefalign::numerics {
namespace {

using Build = std::function<Var(Tape&, const std::vector<Var>&)>;

Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(r, c);
  for (double& v : t.data) v = n(rng);
  return t;
}

// Central-difference check of a scalar function of the blocks in `inputs`.
GradCheckReport check(const Build& build, const ParameterSet& inputs, std::uint64_t seed = 1) {
  auto loss = [&](const ParameterSet& p) {
    Tape t(false);
    std::vector<Var> vars;
    for (const auto& b : p.blocks()) vars.push_back(t.constant(b.value));
    return t.scalar(build(t, vars));
  };
  auto grad = [&](const ParameterSet& p, ParameterSet& g) {
    Tape t;
    std::vector<Var> vars;
    for (const auto& b : p.blocks()) vars.push_back(t.variable(b.value));
    const Var out = build(t, vars);
    const double v = t.scalar(out);
    t.backward(out);
    for (std::size_t i = 0; i < vars.size(); ++i) g.block(i).value = t.grad(vars[i]);
    return v;
  };
  GradCheckOptions o;
  o.seed = seed;
  o.num_coordinates = 1000;
  return finite_diff_check(loss, grad, inputs, o);
}

// Contracts a matrix output against fixed random weights so every entry
// matters to the scalar loss.
Var contract(Tape& t, Var m, std::uint64_t seed) {
  const Tensor& v = t.value(m);
  std::mt19937_64 rng(seed);
  return sum(mul(m, t.constant(random_tensor(v.rows, v.cols, rng))));
}

class OpGradients : public ::testing::Test {
 protected:
  std::mt19937_64 rng{42};
};

TEST_F(OpGradients, Matmul) {
  ParameterSet p;
  p.add("a", random_tensor(3, 4, rng));
  p.add("b", random_tensor(4, 5, rng));
  const auto r = check([](Tape& t, const auto& v) { return contract(t, matmul(v[0], v[1]), 1); },
                       p);
  EXPECT_LT(r.max_relative_error, 1e-7);
}

TEST_F(OpGradients, MatmulTransposed) {
  ParameterSet p;
  p.add("a", random_tensor(3, 4, rng));
  p.add("b", random_tensor(5, 4, rng));
  const auto r = check(
      [](Tape& t, const auto& v) { return contract(t, matmul_transposed(v[0], v[1]), 2); }, p);
  EXPECT_LT(r.max_relative_error, 1e-7);
}

TEST_F(OpGradients, ElementwiseArithmetic) {
  ParameterSet p;
  p.add("a", random_tensor(2, 3, rng));
  p.add("b", random_tensor(2, 3, rng));
  p.add("row", random_tensor(1, 3, rng));
  const auto r = check(
      [](Tape& t, const auto& v) {
        Var x = add(v[0], v[1]) * v[0] - v[1];
        x = add_row(x, v[2]) * 0.7 + 1.5;
        return contract(t, -x, 3);
      },
      p);
  EXPECT_LT(r.max_relative_error, 1e-7);
}

TEST_F(OpGradients, Gelu) {
  ParameterSet p;
  p.add("a", random_tensor(4, 4, rng, 2.0));
  const auto r = check([](Tape& t, const auto& v) { return contract(t, gelu(v[0]), 4); }, p);
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST_F(OpGradients, LayerNorm) {
  ParameterSet p;
  p.add("x", random_tensor(3, 6, rng));
  p.add("g", random_tensor(1, 6, rng));
  p.add("b", random_tensor(1, 6, rng));
  const auto r = check(
      [](Tape& t, const auto& v) { return contract(t, layer_norm(v[0], v[1], v[2]), 5); }, p);
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST_F(OpGradients, EmbeddingWithRepeatedIds) {
  ParameterSet p;
  p.add("table", random_tensor(5, 3, rng));
  const std::vector<int> ids{1, 4, 1, 0};
  const auto r = check(
      [&](Tape& t, const auto& v) { return contract(t, embedding(v[0], ids), 6); }, p);
  EXPECT_LT(r.max_relative_error, 1e-7);
}

TEST_F(OpGradients, SliceAndConcat) {
  ParameterSet p;
  p.add("a", random_tensor(3, 6, rng));
  const auto r = check(
      [](Tape& t, const auto& v) {
        const std::vector<Var> parts{slice_cols(v[0], 4, 2), slice_cols(v[0], 0, 3)};
        return contract(t, concat_cols(parts), 7);
      },
      p);
  EXPECT_LT(r.max_relative_error, 1e-7);
}

TEST_F(OpGradients, CausalSoftmaxAndLogSoftmax) {
  ParameterSet p;
  p.add("a", random_tensor(4, 4, rng));
  const auto r = check(
      [](Tape& t, const auto& v) {
        return contract(t, log_softmax_rows(causal_softmax(v[0]) + v[0]), 8);
      },
      p);
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST_F(OpGradients, PickSumAndReductions) {
  ParameterSet p;
  p.add("a", random_tensor(3, 4, rng));
  p.add("s", random_tensor(1, 1, rng));
  const std::vector<std::pair<std::size_t, std::size_t>> cells{{0, 1}, {2, 3}, {0, 1}};
  const auto r = check(
      [&](Tape& t, const auto& v) {
        (void)t;
        const std::vector<Var> xs{pick_sum(v[0], cells), sum(v[0]), v[1] * v[1]};
        return add_n(xs) + mean(xs);
      },
      p);
  EXPECT_LT(r.max_relative_error, 1e-7);
}

TEST_F(OpGradients, ScalarNonlinearities) {
  ParameterSet p;
  p.add("a", random_tensor(1, 1, rng));
  p.add("b", random_tensor(1, 1, rng));
  const auto r = check(
      [](Tape& t, const auto& v) {
        (void)t;
        return log_sigmoid(v[0]) + sigmoid(v[1]) * 2.0 + square(v[0] - v[1]) +
               relu(v[0] + 3.0);
      },
      p);
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(Tape, UnusedVariableHasExactlyZeroGradient) {
  Tape t;
  const Var used = t.variable(Tensor::scalar(2.0));
  const Var unused = t.variable(Tensor(2, 2, 1.0));
  const Var out = square(used);
  t.backward(out);
  EXPECT_EQ(t.grad(used).data[0], 4.0);
  EXPECT_EQ(t.grad(unused), Tensor(2, 2, 0.0));
}

TEST(Tape, BackwardTwiceThrows) {
  Tape t;
  const Var x = t.variable(Tensor::scalar(1.0));
  const Var y = x * x;
  t.backward(y);
  EXPECT_THROW(t.backward(y), Error);
}

TEST(Tape, BackwardNeedsScalarOutput) {
  Tape t;
  const Var x = t.variable(Tensor(2, 2, 1.0));
  EXPECT_THROW(t.backward(x), Error);
}

TEST(Tape, SharedSubexpressionAccumulates) {
  // f = x*x + x*x with x = 3 gives df/dx = 4x.
  Tape t;
  const Var x = t.variable(Tensor::scalar(3.0));
  const Var sq = x * x;
  const Var f = sq + sq;
  t.backward(f);
  EXPECT_EQ(t.grad(x).data[0], 12.0);
}

TEST(Tape, NonRecordingTapeKeepsValues) {
  Tape t(false);
  const Var x = t.constant(Tensor::scalar(-0.3));
  EXPECT_NEAR(t.scalar(log_sigmoid(x)), -0.854355, 5e-7);
  const std::size_t mark = t.size();
  (void)(x + 1.0);
  t.truncate(mark);
  EXPECT_EQ(t.size(), mark);
}

TEST(Tape, ShapeMismatchThrows) {
  Tape t;
  const Var a = t.variable(Tensor(2, 3));
  const Var b = t.variable(Tensor(2, 2));
  EXPECT_THROW(matmul(a, b), Error);
  EXPECT_THROW(add(a, b), Error);
}

}  // namespace
}  // namespace prefalign::numerics
