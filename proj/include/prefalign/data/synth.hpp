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

#ifndef PREFALIGN_DATA_SYNTH_HPP_
#define PREFALIGN_DATA_SYNTH_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "prefalign/data/dataset.hpp"
#include "prefalign/lm/vocabulary.hpp"

namespace prefalign::data {

inline constexpr std::size_t kMinSynthPairs = 10;

struct SynthOptions {
  // Probability that a corpus sentence ends in a marked (stereotyping)
  // completion rather than a neutral one.
  double marked_rate = 0.85;
  std::size_t corpus_sentences_per_pair = 20;
  std::size_t mc_items_per_pair = 1;
};

struct SynthData {
  // Pretraining sentences, prompt and completion joined by a space, after
  // one coverage sentence per word pool entry.
  std::vector<std::string> corpus;
  PreferenceDataset preferences;
  std::vector<MultipleChoiceItem> mc_items;
  // Closed vocabulary covering every text above.
  lm::Vocabulary vocab;
};

// Templated prompts whose neutral completions are "chosen" and whose
// completions built from a marked group-word class are "rejected". The
// corpus over-represents the marked class so a model pretrained on it
// prefers rejected completions. Multiple-choice questions use freshly drawn
// prompts; their correct option is the neutral completion. Pure function of
// its arguments. Throws UsageError when n_pairs < kMinSynthPairs.
SynthData synth_generate(std::uint64_t seed, std::size_t n_pairs, lm::TokenScheme scheme,
                         const SynthOptions& options = {});

}  // namespace prefalign::data

#endif  // PREFALIGN_DATA_SYNTH_HPP_
