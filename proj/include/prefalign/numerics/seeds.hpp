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

#ifndef PREFALIGN_NUMERICS_SEEDS_HPP_
#define PREFALIGN_NUMERICS_SEEDS_HPP_

#include <cstdint>
#include <initializer_list>

namespace prefalign::numerics {

// Deterministic sub-seed from a base seed and a path of stream indices
// (splitmix64 finaliser applied per component).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t s = mix(base);
  for (std::uint64_t p : path) s = mix(s ^ mix(p));
  return s;
}

}  // namespace prefalign::numerics

#endif  // PREFALIGN_NUMERICS_SEEDS_HPP_
