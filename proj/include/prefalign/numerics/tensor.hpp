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

#ifndef PREFALIGN_NUMERICS_TENSOR_HPP_
#define PREFALIGN_NUMERICS_TENSOR_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prefalign::numerics {

// Dense row-major matrix of doubles. A scalar is a 1x1 tensor.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Tensor scalar(double v) { return Tensor(1, 1, v); }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const {
    return rows == o.rows && cols == o.cols;
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool operator==(const Tensor&) const = default;
};

struct ParameterBlock {
  std::string name;
  Tensor value;
};

// Ordered collection of named parameter blocks. The order is significant:
// it fixes the reduction order, the checkpoint layout and the flat
// coordinate numbering used by gradient checks.
class ParameterSet {
 public:
  void add(std::string name, Tensor value);

  std::size_t num_blocks() const { return blocks_.size(); }
  std::size_t num_scalars() const;
  ParameterBlock& block(std::size_t i) { return blocks_[i]; }
  const ParameterBlock& block(std::size_t i) const { return blocks_[i]; }
  std::span<ParameterBlock> blocks() { return blocks_; }
  std::span<const ParameterBlock> blocks() const { return blocks_; }
  std::optional<std::size_t> find(const std::string& name) const;

  // Same block names and shapes, all values zero.
  ParameterSet zeros_like() const;
  bool same_layout(const ParameterSet& other) const;

  // Flat coordinate access across all blocks in order.
  double& at(std::size_t flat);
  double at(std::size_t flat) const;
  // (block index, offset within block) of a flat coordinate.
  std::pair<std::size_t, std::size_t> locate(std::size_t flat) const;

  void fill(double v);

  // Bitwise equality of names, shapes and values.
  bool bit_identical(const ParameterSet& other) const;

  // Hex SHA-256 over names, shapes and the little-endian value bytes.
  std::string sha256() const;

 private:
  std::vector<ParameterBlock> blocks_;
};

// Global L2 norm over all blocks.
double l2_norm(const ParameterSet& p);

}  // namespace prefalign::numerics

#endif  // PREFALIGN_NUMERICS_TENSOR_HPP_
