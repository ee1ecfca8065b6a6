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

#include "prefalign/lm/vocabulary.hpp"

#include <algorithm>
#include <set>

namespace prefalign::lm {

std::string_view to_string(TokenScheme s) { return s == TokenScheme::kChar ? "char" : "word"; }

TokenScheme parse_token_scheme(std::string_view s) {
  if (s == "char") return TokenScheme::kChar;
  if (s == "word") return TokenScheme::kWord;
  throw UsageError("unknown token scheme '" + std::string(s) + "' (expected char|word)");
}

namespace {

// Length of the UTF-8 sequence starting at s[i], or 0 if malformed.
std::size_t utf8_length(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  std::size_t len = 0;
  std::uint32_t cp = 0;
  if (c < 0x80) return 1;
  if ((c & 0xE0) == 0xC0) {
    len = 2;
    cp = c & 0x1F;
  } else if ((c & 0xF0) == 0xE0) {
    len = 3;
    cp = c & 0x0F;
  } else if ((c & 0xF8) == 0xF0) {
    len = 4;
    cp = c & 0x07;
  } else {
    return 0;
  }
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto cc = static_cast<unsigned char>(s[i + k]);
    if ((cc & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (cc & 0x3F);
  }
  // Overlong forms, surrogates and out-of-range code points.
  if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
      cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    return 0;
  }
  return len;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace

bool is_valid_utf8(std::string_view s) {
  for (std::size_t i = 0; i < s.size();) {
    const std::size_t n = utf8_length(s, i);
    if (n == 0) return false;
    i += n;
  }
  return true;
}

Vocabulary::Vocabulary(TokenScheme scheme, std::vector<std::string> tokens)
    : scheme_(scheme), tokens_(std::move(tokens)) {
  if (tokens_.size() < 3 || tokens_[0] != kBos || tokens_[1] != kEos || tokens_[2] != kPad) {
    throw Error("vocabulary must begin with <bos>, <eos>, <pad>");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw Error("vocabulary token '" + tokens_[i] + "' is duplicated");
    }
  }
}

Vocabulary Vocabulary::build(TokenScheme scheme, std::span<const std::string> texts) {
  Vocabulary probe(scheme, {std::string(kBos), std::string(kEos), std::string(kPad)});
  std::set<std::string> units;
  for (const auto& t : texts) {
    for (auto& u : probe.units(t)) units.insert(std::move(u));
  }
  std::vector<std::string> tokens{std::string(kBos), std::string(kEos), std::string(kPad)};
  for (const auto& u : units) {
    if (u != kBos && u != kEos && u != kPad) tokens.push_back(u);
  }
  return Vocabulary(scheme, std::move(tokens));
}

std::optional<TokenId> Vocabulary::lookup(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error("token id " + std::to_string(id) + " outside vocabulary of size " +
                std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Vocabulary::units(std::string_view text) const {
  if (!is_valid_utf8(text)) throw EncodeError("text is not valid UTF-8", {});
  std::vector<std::string> out;
  if (scheme_ == TokenScheme::kChar) {
    for (std::size_t i = 0; i < text.size();) {
      const std::size_t n = utf8_length(text, i);
      out.emplace_back(text.substr(i, n));
      i += n;
    }
    return out;
  }
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

TokenSequence Vocabulary::encode_units(std::string_view text) const {
  TokenSequence ids;
  std::vector<std::string> missing;
  for (const auto& u : units(text)) {
    if (const auto id = lookup(u)) {
      ids.push_back(*id);
    } else if (std::find(missing.begin(), missing.end(), u) == missing.end()) {
      missing.push_back(u);
    }
  }
  if (!missing.empty()) {
    std::string msg = "out-of-vocabulary unit(s):";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw EncodeError(msg, std::move(missing));
  }
  return ids;
}

TokenSequence Vocabulary::encode(std::string_view text) const {
  TokenSequence ids{bos()};
  const auto body = encode_units(text);
  ids.insert(ids.end(), body.begin(), body.end());
  return ids;
}

TokenSequence Vocabulary::encode_completion(std::string_view text) const {
  TokenSequence ids = encode_units(text);
  ids.push_back(eos());
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  bool first = true;
  for (TokenId id : ids) {
    if (id == bos() || id == eos() || id == pad()) continue;
    if (scheme_ == TokenScheme::kWord && !first) out.push_back(' ');
    out += token(id);
    first = false;
  }
  return out;
}

}  // namespace prefalign::lm
