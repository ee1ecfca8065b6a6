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

#include "prefalign/numerics/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>

#include "prefalign/error.hpp"
#include "prefalign/numerics/hash.hpp"

namespace prefalign::numerics {

void ParameterSet::add(std::string name, Tensor value) {
  if (find(name)) throw Error("duplicate parameter block '" + name + "'");
  blocks_.push_back({std::move(name), std::move(value)});
}

std::size_t ParameterSet::num_scalars() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.value.size();
  return n;
}

std::optional<std::size_t> ParameterSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].name == name) return i;
  }
  return std::nullopt;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  out.blocks_.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    out.blocks_.push_back({b.name, Tensor(b.value.rows, b.value.cols)});
  }
  return out;
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].name != other.blocks_[i].name ||
        !blocks_[i].value.same_shape(other.blocks_[i].value)) {
      return false;
    }
  }
  return true;
}

std::pair<std::size_t, std::size_t> ParameterSet::locate(std::size_t flat) const {
  std::size_t rest = flat;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::size_t n = blocks_[i].value.size();
    if (rest < n) return {i, rest};
    rest -= n;
  }
  throw Error("flat parameter index " + std::to_string(flat) + " out of range");
}

double& ParameterSet::at(std::size_t flat) {
  const auto [b, off] = locate(flat);
  return blocks_[b].value.data[off];
}

double ParameterSet::at(std::size_t flat) const {
  const auto [b, off] = locate(flat);
  return blocks_[b].value.data[off];
}

void ParameterSet::fill(double v) {
  for (auto& b : blocks_) std::fill(b.value.data.begin(), b.value.data.end(), v);
}

bool ParameterSet::bit_identical(const ParameterSet& other) const {
  if (!same_layout(other)) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& a = blocks_[i].value.data;
    const auto& b = other.blocks_[i].value.data;
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (std::bit_cast<std::uint64_t>(a[j]) != std::bit_cast<std::uint64_t>(b[j])) {
        return false;
      }
    }
  }
  return true;
}

std::string ParameterSet::sha256() const {
  Sha256 h;
  for (const auto& b : blocks_) {
    h.update(b.name);
    h.update_u64(b.value.rows);
    h.update_u64(b.value.cols);
    std::vector<std::byte> bytes(8 * b.value.size());
    for (std::size_t j = 0; j < b.value.size(); ++j) {
      const auto bits = std::bit_cast<std::uint64_t>(b.value.data[j]);
      for (int k = 0; k < 8; ++k) {
        bytes[8 * j + k] = static_cast<std::byte>((bits >> (8 * k)) & 0xffu);
      }
    }
    h.update(bytes);
  }
  return h.finish();
}

double l2_norm(const ParameterSet& p) {
  double s = 0.0;
  for (const auto& b : p.blocks()) {
    for (double v : b.value.data) s += v * v;
  }
  return std::sqrt(s);
}

}  // namespace prefalign::numerics
