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

#ifndef PREFALIGN_NUMERICS_TAPE_HPP_
#define PREFALIGN_NUMERICS_TAPE_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "prefalign/numerics/tensor.hpp"

namespace prefalign::numerics {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives and
// has not been truncated below it.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
};

// Reverse-mode gradient tape over matrix-valued nodes.
//
// Nodes are appended in evaluation order, so creation order is a topological
// order. backward() walks the nodes once, from the output down to the first
// node, invoking each recorded backward rule whose output received a
// gradient. Nodes created from constants only never record a rule, and a
// tape built with record=false records none at all (evaluation mode).
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var constant(double v) { return constant(Tensor::scalar(v)); }
  // Leaf that accumulates a gradient.
  Var variable(Tensor value);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  // Gradient of the last backward() output w.r.t. v; zeros if nothing flowed.
  Tensor grad(Var v) const;

  // Seeds d(output)/d(output) = 1 and propagates. output must be 1x1.
  // May be called once per tape.
  void backward(Var output);

  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return record_; }

  // Drops every node with id >= n. Used to reuse bound parameters across
  // many evaluation passes.
  void truncate(std::size_t n);

  // ---- used by op implementations ----
  Var push(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var push(Tensor value, std::span<const Var> inputs, BackwardFn fn);
  const Tensor& value_at(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad_at(std::size_t id) const { return nodes_[id].grad; }
  bool needs_grad_at(std::size_t id) const { return nodes_[id].requires_grad; }
  // Lazily zero-initialised gradient buffer of a node.
  Tensor& grad_buffer(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until something flows into it
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  bool record_;
  bool backward_done_ = false;
};

// ---- matrix ops ----
Var matmul(Var a, Var b);
// a * b^T
Var matmul_transposed(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
// Elementwise product of equal shapes.
Var mul(Var a, Var b);
// Adds a 1 x n row to every row of a.
Var add_row(Var a, Var row);
Var scale(Var a, double c);
Var add_constant(Var a, double c);
// tanh-approximated GELU.
Var gelu(Var a);
// Row-wise layer normalisation with 1 x n gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
// Rows of `table` selected by ids.
Var embedding(Var table, std::span<const int> ids);
Var slice_cols(Var a, std::size_t start, std::size_t width);
Var concat_cols(std::span<const Var> parts);
// Row softmax of a square matrix with entries above the diagonal masked out.
Var causal_softmax(Var a);
Var log_softmax_rows(Var a);
// Sum of selected (row, col) entries, as a 1x1 node.
Var pick_sum(Var a, std::span<const std::pair<std::size_t, std::size_t>> cells);
// Sum of all entries, as a 1x1 node.
Var sum(Var a);
Var add_n(std::span<const Var> parts);
Var mean(std::span<const Var> scalars);

// ---- elementwise ----
Var log_sigmoid(Var a);
Var sigmoid(Var a);
Var square(Var a);
Var relu(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator+(Var a, double c) { return add_constant(a, c); }
inline Var operator+(double c, Var a) { return add_constant(a, c); }
inline Var operator-(Var a, double c) { return add_constant(a, -c); }
inline Var operator-(double c, Var a) { return add_constant(scale(a, -1.0), c); }
inline Var operator-(Var a) { return scale(a, -1.0); }

}  // namespace prefalign::numerics

#endif  // PREFALIGN_NUMERICS_TAPE_HPP_
