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

#ifndef PREFALIGN_TESTS_SUPPORT_FUZZ_HPP_
#define PREFALIGN_TESTS_SUPPORT_FUZZ_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "prefalign/lm/vocabulary.hpp"

namespace fuzz {

// One generated JSONL line and whether ingestion must accept it.
struct Line {
  std::string text;
  bool valid = false;
};

inline const std::vector<std::string>& words() {
  static const std::vector<std::string> w = {"the", "nurse", "said", "that", "she", "he",
                                             "they", "was", "kind", "rude", "always", "often"};
  return w;
}

inline prefalign::lm::Vocabulary vocab() {
  std::vector<std::string> texts = words();
  return prefalign::lm::Vocabulary::build(prefalign::lm::TokenScheme::kWord, texts);
}

inline std::string phrase(std::mt19937_64& rng, int lo, int hi) {
  std::uniform_int_distribution<int> len(lo, hi);
  std::uniform_int_distribution<std::size_t> pick(0, words().size() - 1);
  std::string s;
  for (int i = len(rng); i > 0; --i) s += (s.empty() ? "" : " ") + words()[pick(rng)];
  return s;
}

inline std::string json_str(const std::string& s) { return "\"" + s + "\""; }

// Mix of valid records and every malformation class ingestion must reject.
// Valid records fit a context of `context` word tokens.
inline std::vector<Line> lines(std::uint64_t seed, std::size_t n, std::size_t context) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> kind(0, 13);
  std::vector<Line> out;
  const int short_max = static_cast<int>((context - 2) / 2);
  while (out.size() < n) {
    const std::string p = phrase(rng, 1, short_max);
    std::string c = phrase(rng, 1, short_max);
    std::string r = phrase(rng, 1, short_max);
    while (r == c) r = phrase(rng, 1, short_max);
    const std::string head = "\"prompt\":" + json_str(p) + ",\"chosen\":" + json_str(c);
    switch (kind(rng)) {
      case 0: case 1: case 2: case 3:
        out.push_back({"{" + head + ",\"rejected\":" + json_str(r) + "}", true});
        break;
      case 4:
        out.push_back({"{" + head + ",\"rejected\":" + json_str(r) + ",\"category\":\"race\"}",
                       true});
        break;
      case 5:
        out.push_back({"{" + head + ",\"rejected\":" + json_str(c) + "}", false});
        break;
      case 6:
        out.push_back({"{" + head + "}", false});
        break;
      case 7:
        out.push_back({"{" + head + ",\"rejected\":" + json_str(r), false});
        break;
      case 8:
        out.push_back({"{" + head + ",\"rejected\":7}", false});
        break;
      case 9:
        out.push_back({"{" + head + ",\"rejected\":" + json_str(r) + ",\"extra\":1}", false});
        break;
      case 10:
        out.push_back({"{" + head + ",\"rejected\":\"" + r + " \xff\"}", false});
        break;
      case 11:
        out.push_back({"{" + head + ",\"rejected\":" +
                           json_str(phrase(rng, static_cast<int>(context),
                                         static_cast<int>(context) + 4)) +
                           "}",
                       false});
        break;
      case 12:
        out.push_back({"{" + head + ",\"rejected\":" + json_str(r + " zebra") + "}", false});
        break;
      default:
        out.push_back({std::uniform_int_distribution<int>(0, 1)(rng) ? "" : "[1,2,3]", false});
        break;
    }
  }
  return out;
}

}  // namespace fuzz

#endif  // PREFALIGN_TESTS_SUPPORT_FUZZ_HPP_
