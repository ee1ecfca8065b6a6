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

#ifndef PREFALIGN_LM_VOCABULARY_HPP_
#define PREFALIGN_LM_VOCABULARY_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "prefalign/error.hpp"

namespace prefalign::lm {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

// Char: one token per UTF-8 code point. Word: whitespace-separated words;
// runs of whitespace collapse to a single separator, so decode(encode(t))
// reproduces t exactly when t is single-space separated with no leading or
// trailing whitespace.
enum class TokenScheme { kChar, kWord };

std::string_view to_string(TokenScheme s);
TokenScheme parse_token_scheme(std::string_view s);

class EncodeError : public Error {
 public:
  EncodeError(const std::string& what, std::vector<std::string> units)
      : Error(what), units_(std::move(units)) {}
  const std::vector<std::string>& units() const { return units_; }

 private:
  std::vector<std::string> units_;
};

bool is_valid_utf8(std::string_view s);

// Closed vocabulary. Ids 0, 1, 2 are always <bos>, <eos>, <pad>.
class Vocabulary {
 public:
  static constexpr std::string_view kBos = "<bos>";
  static constexpr std::string_view kEos = "<eos>";
  static constexpr std::string_view kPad = "<pad>";

  // tokens must start with the three reserved tokens and be distinct.
  Vocabulary(TokenScheme scheme, std::vector<std::string> tokens);

  // Reserved tokens followed by every unit of `texts`, sorted.
  static Vocabulary build(TokenScheme scheme, std::span<const std::string> texts);

  TokenScheme scheme() const { return scheme_; }
  std::size_t size() const { return tokens_.size(); }
  TokenId bos() const { return 0; }
  TokenId eos() const { return 1; }
  TokenId pad() const { return 2; }

  std::optional<TokenId> lookup(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Splits text into units under the scheme. Throws EncodeError on invalid
  // UTF-8.
  std::vector<std::string> units(std::string_view text) const;

  // [BOS, units...]. Throws EncodeError listing every out-of-vocabulary unit.
  TokenSequence encode(std::string_view text) const;
  // [units..., EOS]; the form completions take after a prompt.
  TokenSequence encode_completion(std::string_view text) const;
  // Reserved tokens are dropped.
  std::string decode(std::span<const TokenId> ids) const;

 private:
  TokenSequence encode_units(std::string_view text) const;

  TokenScheme scheme_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace prefalign::lm

#endif  // PREFALIGN_LM_VOCABULARY_HPP_
