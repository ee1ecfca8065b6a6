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

#include <gtest/gtest.h>

#include <random>

#include "prefalign/data/synth.hpp"

namespace prefalign::lm {
namespace {

TEST(Vocabulary, ReservedTokensComeFirst) {
  const std::vector<std::string> texts{"b a"};
  const Vocabulary v = Vocabulary::build(TokenScheme::kChar, texts);
  EXPECT_EQ(v.token(v.bos()), "<bos>");
  EXPECT_EQ(v.token(v.eos()), "<eos>");
  EXPECT_EQ(v.token(v.pad()), "<pad>");
  EXPECT_EQ(v.size(), 6u);  // reserved + ' ', 'a', 'b'
  for (TokenId id = 0; id < static_cast<TokenId>(v.size()); ++id) {
    EXPECT_EQ(v.lookup(v.token(id)), id);
  }
}

TEST(Vocabulary, EmptyTextIsBosOnly) {
  const std::vector<std::string> texts{"ab"};
  const Vocabulary v = Vocabulary::build(TokenScheme::kChar, texts);
  EXPECT_EQ(v.encode(""), TokenSequence{v.bos()});
}

TEST(Vocabulary, CharSchemeEncodesEachCharacter) {
  const std::vector<std::string> texts{"abc"};
  const Vocabulary v = Vocabulary::build(TokenScheme::kChar, texts);
  EXPECT_EQ(v.encode("ab"), (TokenSequence{v.bos(), *v.lookup("a"), *v.lookup("b")}));
  EXPECT_EQ(v.encode_completion("ba"), (TokenSequence{*v.lookup("b"), *v.lookup("a"), v.eos()}));
}

TEST(Vocabulary, CharSchemeHandlesMultibyteCodePoints) {
  const std::vector<std::string> texts{"né€"};
  const Vocabulary v = Vocabulary::build(TokenScheme::kChar, texts);
  EXPECT_EQ(v.size(), 6u);
  EXPECT_EQ(v.decode(v.encode("€né")), "€né");
}

TEST(Vocabulary, OutOfVocabularyListsEveryUnit) {
  const std::vector<std::string> texts{"the cat"};
  const Vocabulary v = Vocabulary::build(TokenScheme::kWord, texts);
  try {
    v.encode("the dog and the bird");
    FAIL() << "expected EncodeError";
  } catch (const EncodeError& e) {
    EXPECT_EQ(e.units(), (std::vector<std::string>{"dog", "and", "bird"}));
    EXPECT_NE(std::string(e.what()).find("'dog'"), std::string::npos);
  }
}

TEST(Vocabulary, InvalidUtf8Throws) {
  const std::vector<std::string> texts{"a"};
  const Vocabulary v = Vocabulary::build(TokenScheme::kChar, texts);
  EXPECT_THROW(v.encode(std::string("a\xff")), EncodeError);
  EXPECT_FALSE(is_valid_utf8("\xc3"));
  EXPECT_TRUE(is_valid_utf8("\xc3\xa9"));
}

TEST(Vocabulary, ConstructorRejectsBadTokenLists) {
  EXPECT_THROW(Vocabulary(TokenScheme::kWord, {"a", "<eos>", "<pad>"}), Error);
  EXPECT_THROW(Vocabulary(TokenScheme::kWord, {"<bos>", "<eos>", "<pad>", "x", "x"}), Error);
}

TEST(Vocabulary, RoundTripOnRandomCorpusStrings) {
  const data::SynthData d = data::synth_generate(5, 50, TokenScheme::kWord);
  const Vocabulary char_vocab = Vocabulary::build(TokenScheme::kChar, d.corpus);
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> pick(0, d.corpus.size() - 1);
  for (int i = 0; i < 1000; ++i) {
    // Join 1-3 random corpus sentences.
    std::string s = d.corpus[pick(rng)];
    for (int k = 0; k < i % 3; ++k) s += " " + d.corpus[pick(rng)];
    EXPECT_EQ(d.vocab.decode(d.vocab.encode(s)), s);
    EXPECT_EQ(char_vocab.decode(char_vocab.encode(s)), s);
  }
}

TEST(Vocabulary, SchemeNamesRoundTrip) {
  EXPECT_EQ(parse_token_scheme(to_string(TokenScheme::kChar)), TokenScheme::kChar);
  EXPECT_EQ(parse_token_scheme("word"), TokenScheme::kWord);
  EXPECT_THROW(parse_token_scheme("bpe"), Error);
}

}  // namespace
}  // namespace prefalign::lm
