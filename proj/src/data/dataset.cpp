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

#include "prefalign/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <variant>

#include "json.hpp"
#include "prefalign/error.hpp"
#include "prefalign/numerics/hash.hpp"

namespace prefalign::data {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  });
}

// Encoded length or a reject reason.
std::variant<std::size_t, std::string> encoded_length(const lm::Vocabulary& vocab,
                                                      std::string_view text, bool completion) {
  try {
    return completion ? vocab.encode_completion(text).size() : vocab.encode(text).size();
  } catch (const lm::EncodeError& e) {
    return std::string(e.what());
  }
}

std::optional<std::string> parse_triple(const std::string& line, PreferenceTriple& out) {
  if (blank(line)) return "blank line";
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) return "invalid JSON";
  if (!j.is_object()) return "record is not a JSON object";
  for (const auto& [key, _] : j.items()) {
    if (key != "prompt" && key != "chosen" && key != "rejected" && key != "category" &&
        key != "target") {
      return "unknown key '" + key + "'";
    }
  }
  for (const char* key : {"prompt", "chosen", "rejected"}) {
    if (!j.contains(key)) return std::string("missing key '") + key + "'";
    if (!j.at(key).is_string()) return std::string("key '") + key + "' is not a string";
  }
  out.prompt = j.at("prompt").get<std::string>();
  out.chosen = j.at("chosen").get<std::string>();
  out.rejected = j.at("rejected").get<std::string>();
  for (const char* key : {"category", "target"}) {
    if (!j.contains(key) || j.at(key).is_null()) continue;
    if (!j.at(key).is_string()) return std::string("key '") + key + "' is not a string";
  }
  if (j.contains("category") && j.at("category").is_string()) {
    out.category = j.at("category").get<std::string>();
  }
  if (j.contains("target") && j.at("target").is_string()) {
    out.target = j.at("target").get<std::string>();
  }
  return std::nullopt;
}

}  // namespace

bool is_known_category(std::string_view c) {
  return std::find(std::begin(kCategories), std::end(kCategories), c) != std::end(kCategories);
}

std::vector<PreferenceTriple> PreferenceDataset::subset(Split s) const {
  std::vector<PreferenceTriple> out;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const Split tag = splits.empty() ? Split::kTrain : splits[i];
    if (tag == s) out.push_back(triples[i]);
  }
  return out;
}

std::map<std::string, std::size_t> PreferenceDataset::category_counts() const {
  std::map<std::string, std::size_t> out;
  for (const auto& t : triples) out[t.category.value_or("")] += 1;
  return out;
}

std::optional<std::string> validate_triple(const PreferenceTriple& t, const lm::Vocabulary* vocab,
                                           std::size_t context_length) {
  for (const auto* s : {&t.prompt, &t.chosen, &t.rejected}) {
    if (!lm::is_valid_utf8(*s)) return "invalid UTF-8";
  }
  if (t.target && !lm::is_valid_utf8(*t.target)) return "invalid UTF-8";
  if (blank(t.prompt)) return "empty prompt";
  if (blank(t.chosen)) return "empty chosen";
  if (blank(t.rejected)) return "empty rejected";
  if (t.target && blank(*t.target)) return "empty target";
  if (t.chosen == t.rejected) return "degenerate pair";
  if (t.category && !is_known_category(*t.category)) {
    return "unknown category '" + *t.category + "'";
  }
  if (vocab == nullptr) return std::nullopt;

  const auto p = encoded_length(*vocab, t.prompt, false);
  if (const auto* r = std::get_if<std::string>(&p)) return *r;
  std::size_t longest = 0;
  std::vector<const std::string*> completions{&t.chosen, &t.rejected};
  if (t.target) completions.push_back(&*t.target);
  for (const auto* c : completions) {
    const auto n = encoded_length(*vocab, *c, true);
    if (const auto* r = std::get_if<std::string>(&n)) return *r;
    longest = std::max(longest, std::get<std::size_t>(n));
  }
  const std::size_t total = std::get<std::size_t>(p) + longest;
  if (context_length > 0 && total > context_length) {
    return "context overflow (" + std::to_string(total) + " tokens > context length " +
           std::to_string(context_length) + ")";
  }
  return std::nullopt;
}

LoadResult parse_preferences(std::istream& in, const lm::Vocabulary* vocab,
                             std::size_t context_length) {
  LoadResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    PreferenceTriple t;
    std::optional<std::string> reason;
    try {
      reason = parse_triple(line, t);
      if (!reason) reason = validate_triple(t, vocab, context_length);
    } catch (const std::exception& e) {
      reason = std::string("unparseable record: ") + e.what();
    }
    if (reason) {
      result.rejects.push_back({lineno, *reason});
    } else {
      result.dataset.triples.push_back(std::move(t));
    }
  }
  return result;
}

std::filesystem::path rejects_report_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".rejects.txt");
}

void write_rejects_report(const std::filesystem::path& path, std::span<const Reject> rejects) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write rejects report " + path.string());
  for (const auto& r : rejects) out << "line " << r.line << ": " << r.reason << '\n';
}

LoadResult load_preferences(const std::filesystem::path& path, const lm::Vocabulary* vocab,
                            std::size_t context_length, bool write_report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open preference file " + path.string());
  LoadResult r = parse_preferences(in, vocab, context_length);
  if (write_report) write_rejects_report(rejects_report_path(path), r.rejects);
  if (r.dataset.triples.empty()) {
    throw Error("preference file " + path.string() + " has no valid records (" +
                std::to_string(r.rejects.size()) + " rejected)");
  }
  return r;
}

std::string to_jsonl(const PreferenceTriple& t) {
  ordered_json j;
  j["prompt"] = t.prompt;
  j["chosen"] = t.chosen;
  j["rejected"] = t.rejected;
  if (t.category) j["category"] = *t.category;
  if (t.target) j["target"] = *t.target;
  return j.dump();
}

void write_preferences(const std::filesystem::path& path,
                       std::span<const PreferenceTriple> triples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& t : triples) out << to_jsonl(t) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

PreferenceDataset split(PreferenceDataset dataset, double heldout_fraction, std::uint64_t seed) {
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) {
    throw UsageError("heldout fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset.triples.size();
  const auto heldout = static_cast<std::size_t>(std::llround(heldout_fraction * n));
  if (heldout == 0 || heldout >= n) {
    throw UsageError("heldout fraction " + std::to_string(heldout_fraction) + " on " +
                     std::to_string(n) + " triples leaves an empty " +
                     (heldout == 0 ? "heldout" : "train") + " split");
  }

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    groups[dataset.triples[i].category.value_or("")].push_back(i);
  }

  // Largest-remainder apportionment of the heldout count.
  struct Quota {
    std::vector<std::size_t>* members;
    std::size_t take;
    double remainder;
    std::size_t order;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (auto& [_, members] : groups) {
    const double exact = heldout_fraction * static_cast<double>(members.size());
    const auto take = static_cast<std::size_t>(std::floor(exact));
    quotas.push_back({&members, take, exact - static_cast<double>(take), quotas.size()});
    assigned += take;
  }
  std::vector<Quota*> by_remainder;
  for (auto& q : quotas) by_remainder.push_back(&q);
  std::stable_sort(by_remainder.begin(), by_remainder.end(),
                   [](const Quota* a, const Quota* b) { return a->remainder > b->remainder; });
  for (std::size_t k = 0; assigned < heldout && k < by_remainder.size(); ++k) {
    if (by_remainder[k]->take < by_remainder[k]->members->size()) {
      by_remainder[k]->take += 1;
      assigned += 1;
    }
  }

  std::mt19937_64 rng(seed);
  dataset.splits.assign(n, Split::kTrain);
  for (auto& q : quotas) {
    std::vector<std::size_t> members = *q.members;
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < q.take; ++k) dataset.splits[members[k]] = Split::kHeldout;
  }
  return dataset;
}

std::string dataset_hash(std::span<const PreferenceTriple> triples) {
  numerics::Sha256 h;
  for (const auto& t : triples) {
    h.update(to_jsonl(t));
    h.update("\n");
  }
  return h.finish();
}

std::optional<std::string> validate_mc_item(const MultipleChoiceItem& item) {
  if (blank(item.question)) return "empty question";
  if (item.options.size() < 2) return "fewer than two options";
  if (item.correct_index >= item.options.size()) return "correct_index out of range";
  for (std::size_t i = 0; i < item.options.size(); ++i) {
    if (blank(item.options[i])) return "empty option";
    for (std::size_t j = 0; j < i; ++j) {
      if (item.options[i] == item.options[j]) return "duplicate options";
    }
  }
  return std::nullopt;
}

std::vector<MultipleChoiceItem> load_mc_items(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open multiple-choice file " + path.string());
  std::vector<MultipleChoiceItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    const std::string where = path.string() + " line " + std::to_string(lineno) + ": ";
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(where + "invalid JSON object");
    MultipleChoiceItem item;
    try {
      item.question = j.at("question").get<std::string>();
      item.options = j.at("options").get<std::vector<std::string>>();
      item.correct_index = j.at("correct_index").get<std::size_t>();
      if (j.contains("category")) item.category = j.at("category").get<std::string>();
    } catch (const std::exception& e) {
      throw Error(where + e.what());
    }
    if (const auto r = validate_mc_item(item)) throw Error(where + *r);
    items.push_back(std::move(item));
  }
  if (items.empty()) throw Error("multiple-choice file " + path.string() + " has no items");
  return items;
}

void write_mc_items(const std::filesystem::path& path,
                    std::span<const MultipleChoiceItem> items) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& item : items) {
    ordered_json j;
    j["question"] = item.question;
    j["options"] = item.options;
    j["correct_index"] = item.correct_index;
    j["category"] = item.category;
    out << j.dump() << '\n';
  }
}

}  // namespace prefalign::data
