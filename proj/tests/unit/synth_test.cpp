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

#include "prefalign/data/synth.hpp"

#include <gtest/gtest.h>

#include "prefalign/error.hpp"

namespace prefalign::data {
namespace {

TEST(Synth, SameSeedIsIdentical) {
  const SynthData a = synth_generate(42, 50, lm::TokenScheme::kWord);
  const SynthData b = synth_generate(42, 50, lm::TokenScheme::kWord);
  EXPECT_EQ(a.corpus, b.corpus);
  EXPECT_EQ(a.preferences.triples, b.preferences.triples);
  EXPECT_EQ(a.mc_items, b.mc_items);
  EXPECT_EQ(a.vocab.tokens(), b.vocab.tokens());
  const SynthData c = synth_generate(43, 50, lm::TokenScheme::kWord);
  EXPECT_NE(a.preferences.triples, c.preferences.triples);
}

TEST(Synth, TriplesSatisfyInvariants) {
  for (auto scheme : {lm::TokenScheme::kWord, lm::TokenScheme::kChar}) {
    const SynthData d = synth_generate(7, 100, scheme);
    ASSERT_EQ(d.preferences.triples.size(), 100u);
    for (const auto& t : d.preferences.triples) {
      EXPECT_EQ(validate_triple(t, &d.vocab, 0), std::nullopt) << to_jsonl(t);
      ASSERT_TRUE(t.category.has_value());
      EXPECT_TRUE(is_known_category(*t.category));
    }
    EXPECT_FALSE(d.preferences.is_split());
  }
}

TEST(Synth, CorpusAndItemsUseTheVocabulary) {
  const SynthData d = synth_generate(3, 20, lm::TokenScheme::kWord);
  EXPECT_GE(d.corpus.size(), 20u * SynthOptions{}.corpus_sentences_per_pair);
  for (const auto& s : d.corpus) EXPECT_NO_THROW(d.vocab.encode_completion(s)) << s;
  ASSERT_FALSE(d.mc_items.empty());
  for (const auto& item : d.mc_items) {
    EXPECT_EQ(validate_mc_item(item), std::nullopt);
    EXPECT_NO_THROW(d.vocab.encode(item.question));
    for (const auto& o : item.options) EXPECT_NO_THROW(d.vocab.encode_completion(o));
  }
}

TEST(Synth, TooFewPairsIsAUsageError) {
  EXPECT_THROW(synth_generate(1, kMinSynthPairs - 1, lm::TokenScheme::kWord), UsageError);
  EXPECT_NO_THROW(synth_generate(1, kMinSynthPairs, lm::TokenScheme::kWord));
}

}  // namespace
}  // namespace prefalign::data
