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

#ifndef PREFALIGN_DATA_DATASET_HPP_
#define PREFALIGN_DATA_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefalign/lm/vocabulary.hpp"

namespace prefalign::data {

// Recognised bias categories.
inline constexpr std::string_view kCategories[] = {"gender", "race", "religion",
                                                   "intersectional", "other"};
bool is_known_category(std::string_view c);

// One dataset row: a prompt with its preferred (less biased) and dispreferred
// (biased) completion.
struct PreferenceTriple {
  std::string prompt;
  std::string chosen;
  std::string rejected;
  std::optional<std::string> category;
  // Optional regularisation target for SLiC with an external target.
  std::optional<std::string> target;

  bool operator==(const PreferenceTriple&) const = default;
};

enum class Split { kTrain, kHeldout };

struct PreferenceDataset {
  std::vector<PreferenceTriple> triples;
  // Empty until split() tags the dataset; then one entry per triple.
  std::vector<Split> splits;

  bool is_split() const { return !splits.empty(); }
  // Triples of one split, in dataset order. An untagged dataset is all train.
  std::vector<PreferenceTriple> subset(Split s) const;
  // Counts keyed by category; uncategorised rows count under "".
  std::map<std::string, std::size_t> category_counts() const;
};

struct Reject {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct LoadResult {
  PreferenceDataset dataset;
  std::vector<Reject> rejects;
};

// Reason the triple is invalid, or nullopt. When vocab is given, every text
// must encode under it, and when context_length > 0 the prompt plus the
// longer completion must fit.
std::optional<std::string> validate_triple(const PreferenceTriple& t,
                                           const lm::Vocabulary* vocab,
                                           std::size_t context_length);

// Parses newline-delimited JSON. Never throws on malformed input: each line
// yields either a triple or a Reject.
LoadResult parse_preferences(std::istream& in, const lm::Vocabulary* vocab,
                             std::size_t context_length);

// parse_preferences over a file. Writes the rejects report next to it
// (see rejects_report_path) when write_report is set. Throws when the file
// cannot be read or holds no valid record.
LoadResult load_preferences(const std::filesystem::path& path, const lm::Vocabulary* vocab,
                            std::size_t context_length, bool write_report = true);

std::string to_jsonl(const PreferenceTriple& t);
void write_preferences(const std::filesystem::path& path,
                       std::span<const PreferenceTriple> triples);

// path + ".rejects.txt"
std::filesystem::path rejects_report_path(const std::filesystem::path& path);
// One "line N: reason" row per reject.
void write_rejects_report(const std::filesystem::path& path, std::span<const Reject> rejects);

// Tags round(fraction * N) triples as heldout. Shuffles by seed within each
// category (stratified when any category is present) and apportions the
// heldout count across categories by largest remainder. Throws UsageError
// when either side would be empty or fraction is outside (0, 1).
PreferenceDataset split(PreferenceDataset dataset, double heldout_fraction, std::uint64_t seed);

// Stable content hash of a triple list.
std::string dataset_hash(std::span<const PreferenceTriple> triples);

struct MultipleChoiceItem {
  std::string question;
  std::vector<std::string> options;
  std::size_t correct_index = 0;
  std::string category;

  bool operator==(const MultipleChoiceItem&) const = default;
};

std::optional<std::string> validate_mc_item(const MultipleChoiceItem& item);

// Strict: throws Error naming the line of the first malformed record.
std::vector<MultipleChoiceItem> load_mc_items(const std::filesystem::path& path);
void write_mc_items(const std::filesystem::path& path, std::span<const MultipleChoiceItem> items);

}  // namespace prefalign::data

#endif  // PREFALIGN_DATA_DATASET_HPP_
