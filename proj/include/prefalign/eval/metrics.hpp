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

#ifndef PREFALIGN_EVAL_METRICS_HPP_
#define PREFALIGN_EVAL_METRICS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefalign/data/dataset.hpp"
#include "prefalign/lm/model.hpp"
#include "prefalign/lm/vocabulary.hpp"
#include "prefalign/prefloss/losses.hpp"

namespace prefalign::eval {

// Exact n_correct / n_total counter.
struct Tally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double fraction() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
  bool operator==(const Tally&) const = default;
};

// ---- preference accuracy ----

struct PreferenceRecord {
  std::size_t index = 0;
  std::string category;
  double margin = 0.0;
  bool correct = false;  // margin > 0; ties are incorrect
};

struct PreferenceResult {
  Tally tally;
  std::vector<PreferenceRecord> records;
  double fraction() const { return tally.fraction(); }
};

// Sequence log-probabilities of the chosen and rejected completion of every
// triple under one model, in triple order.
struct CompletionLogProbs {
  double chosen = 0.0;
  double rejected = 0.0;
};

struct EncodedTriple {
  lm::TokenSequence prompt;
  lm::TokenSequence chosen;
  lm::TokenSequence rejected;
  std::optional<lm::TokenSequence> target;
};

EncodedTriple encode_triple(const lm::Vocabulary& vocab, const data::PreferenceTriple& t);

std::vector<CompletionLogProbs> score_completions(const lm::ModelParams& model,
                                                  std::span<const EncodedTriple> triples);

// categories may be empty or hold one label per quad.
PreferenceResult preference_accuracy(std::span<const prefloss::LogProbQuad> quads, double beta,
                                     std::span<const std::string> categories = {});

PreferenceResult preference_accuracy(const lm::ModelParams& policy,
                                     const lm::ModelParams& reference,
                                     const lm::Vocabulary& vocab,
                                     std::span<const data::PreferenceTriple> triples,
                                     double beta);

// ---- multiple choice ----

enum class McNormalization { kNone, kPerToken };
McNormalization parse_mc_normalization(std::string_view s);

struct McPrediction {
  std::size_t item = 0;
  std::size_t predicted = 0;
  bool correct = false;
  std::vector<double> scores;
};

struct McResult {
  Tally overall;
  std::map<std::string, Tally> per_category;
  std::vector<McPrediction> predictions;
};

// Index of the largest score; the lowest index wins ties.
std::size_t argmax_lowest_index(std::span<const double> scores);

// Scores each option by sequence_logprob(question, option), divided by the
// option's token count (including its end-of-sequence token) under
// kPerToken, and predicts the argmax.
McResult mc_accuracy(const lm::ModelParams& model, const lm::Vocabulary& vocab,
                     std::span<const data::MultipleChoiceItem> items,
                     McNormalization normalization = McNormalization::kPerToken);

// ---- KL to reference ----

struct KlOptions {
  std::size_t samples_per_prompt = 4;
  std::size_t max_new_tokens = 16;
  std::uint64_t seed = 0;
  std::optional<lm::TokenId> eos;
};

struct KlTerm {
  std::size_t prompt = 0;
  double value = 0.0;
};

struct KlEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::vector<KlTerm> terms;
};

// Monte Carlo estimate of E_{y ~ policy(.|x)}[ln policy(y|x) - ln reference(y|x)]
// averaged over prompts and samples, with the standard error of the mean.
// Sample (prompt i, draw j) uses a seed derived from (seed, i, j).
KlEstimate kl_to_reference(const lm::ModelParams& policy, const lm::ModelParams& reference,
                           std::span<const lm::TokenSequence> prompts, const KlOptions& options);

// Mean and standard error of a subset of terms.
KlEstimate summarize_kl(std::vector<KlTerm> terms);

// ---- report ----

// One CSV row. n counts preference pairs when preference data was scored,
// otherwise multiple-choice items.
struct ReportRow {
  std::string scope;  // "overall" or "category"
  std::string category;
  std::size_t n = 0;
  std::optional<double> preference_acc;
  std::optional<double> mc_acc;
  std::optional<double> mean_margin;
  std::optional<double> kl;
  std::optional<double> kl_se;

  bool operator==(const ReportRow&) const = default;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  bool operator==(const EvalReport&) const = default;
};

inline constexpr std::string_view kReportHeader =
    "scope,category,n,preference_acc,mc_acc,mean_margin,kl,kl_se";
inline constexpr std::string_view kUncategorized = "uncategorized";

struct ReportInputs {
  const PreferenceResult* preference = nullptr;
  const McResult* mc = nullptr;
  const KlEstimate* kl = nullptr;
  // Category of each KL prompt index.
  std::vector<std::string> kl_prompt_categories;
};

// Overall row plus one row per category (sorted by name). Accuracies are
// recomputed from exact counts, so category rows aggregate to the overall row.
EvalReport build_report(const ReportInputs& in);

std::string report_csv(const EvalReport& report);
EvalReport parse_report_csv(std::string_view text);
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);

// ---- combined evaluation ----

struct EvalOptions {
  double beta = 0.1;
  McNormalization normalization = McNormalization::kPerToken;
  KlOptions kl;
};

struct EvalSummary {
  PreferenceResult preference;
  std::optional<McResult> mc;
  KlEstimate kl;
  EvalReport report;
};

// Preference accuracy and KL on triples (KL prompts are the triples'
// prompts), MC accuracy of the policy when items are given.
EvalSummary evaluate(const lm::ModelParams& policy, const lm::ModelParams& reference,
                     const lm::Vocabulary& vocab, std::span<const data::PreferenceTriple> triples,
                     const std::vector<data::MultipleChoiceItem>* mc_items,
                     const EvalOptions& options);

}  // namespace prefalign::eval

#endif  // PREFALIGN_EVAL_METRICS_HPP_
