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

#ifndef PREFALIGN_NUMERICS_HASH_HPP_
#define PREFALIGN_NUMERICS_HASH_HPP_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace prefalign::numerics {

// Incremental SHA-256, hex-encoded on finish().
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::span<const std::byte> bytes);
  void update(std::string_view s);
  void update_u64(std::uint64_t v);
  void update_f64(double v);
  std::string finish();

 private:
  void* ctx_;
};

std::string sha256_hex(std::string_view s);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace prefalign::numerics

#endif  // PREFALIGN_NUMERICS_HASH_HPP_
