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

#include "prefalign/eval/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "prefalign/error.hpp"
#include "prefalign/numerics/format.hpp"
#include "prefalign/numerics/seeds.hpp"

namespace prefalign::eval {

EncodedTriple encode_triple(const lm::Vocabulary& vocab, const data::PreferenceTriple& t) {
  EncodedTriple e{vocab.encode(t.prompt), vocab.encode_completion(t.chosen),
                  vocab.encode_completion(t.rejected), std::nullopt};
  if (t.target) e.target = vocab.encode_completion(*t.target);
  return e;
}

std::vector<CompletionLogProbs> score_completions(const lm::ModelParams& model,
                                                  std::span<const EncodedTriple> triples) {
  lm::Scorer scorer(model);
  std::vector<CompletionLogProbs> out;
  out.reserve(triples.size());
  for (const auto& t : triples) {
    out.push_back({scorer.logprob(t.prompt, t.chosen), scorer.logprob(t.prompt, t.rejected)});
  }
  return out;
}

PreferenceResult preference_accuracy(std::span<const prefloss::LogProbQuad> quads, double beta,
                                     std::span<const std::string> categories) {
  if (quads.empty()) throw Error("preference_accuracy: empty split");
  if (!categories.empty() && categories.size() != quads.size()) {
    throw Error("preference_accuracy: one category per example is required");
  }
  PreferenceResult r;
  r.records.reserve(quads.size());
  for (std::size_t i = 0; i < quads.size(); ++i) {
    PreferenceRecord rec;
    rec.index = i;
    rec.category = categories.empty() ? std::string(kUncategorized) : categories[i];
    rec.margin = prefloss::margin(quads[i], beta);
    rec.correct = rec.margin > 0.0;
    r.tally.total += 1;
    r.tally.correct += rec.correct ? 1 : 0;
    r.records.push_back(std::move(rec));
  }
  return r;
}

PreferenceResult preference_accuracy(const lm::ModelParams& policy,
                                     const lm::ModelParams& reference,
                                     const lm::Vocabulary& vocab,
                                     std::span<const data::PreferenceTriple> triples,
                                     double beta) {
  std::vector<EncodedTriple> enc;
  std::vector<std::string> cats;
  for (const auto& t : triples) {
    enc.push_back(encode_triple(vocab, t));
    cats.push_back(t.category.value_or(std::string(kUncategorized)));
  }
  const auto pol = score_completions(policy, enc);
  const auto ref = score_completions(reference, enc);
  std::vector<prefloss::LogProbQuad> quads;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    quads.push_back({pol[i].chosen, pol[i].rejected, ref[i].chosen, ref[i].rejected});
  }
  return preference_accuracy(quads, beta, cats);
}

McNormalization parse_mc_normalization(std::string_view s) {
  if (s == "none") return McNormalization::kNone;
  if (s == "per_token") return McNormalization::kPerToken;
  throw UsageError("unknown MC normalization '" + std::string(s) + "' (expected none|per_token)");
}

std::size_t argmax_lowest_index(std::span<const double> scores) {
  if (scores.empty()) throw Error("argmax of an empty score list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

McResult mc_accuracy(const lm::ModelParams& model, const lm::Vocabulary& vocab,
                     std::span<const data::MultipleChoiceItem> items,
                     McNormalization normalization) {
  if (items.empty()) throw Error("mc_accuracy: no items");
  lm::Scorer scorer(model);
  McResult r;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (const auto bad = data::validate_mc_item(item)) {
      throw Error("multiple-choice item " + std::to_string(i) + ": " + *bad);
    }
    const auto q = vocab.encode(item.question);
    McPrediction p;
    p.item = i;
    for (const auto& opt : item.options) {
      const auto c = vocab.encode_completion(opt);
      double s = scorer.logprob(q, c);
      if (normalization == McNormalization::kPerToken) s /= static_cast<double>(c.size());
      p.scores.push_back(s);
    }
    p.predicted = argmax_lowest_index(p.scores);
    p.correct = p.predicted == item.correct_index;
    auto& cat = r.per_category[item.category.empty() ? std::string(kUncategorized)
                                                     : item.category];
    for (Tally* t : {&r.overall, &cat}) {
      t->total += 1;
      t->correct += p.correct ? 1 : 0;
    }
    r.predictions.push_back(std::move(p));
  }
  return r;
}

KlEstimate summarize_kl(std::vector<KlTerm> terms) {
  KlEstimate e;
  e.terms = std::move(terms);
  const std::size_t n = e.terms.size();
  if (n == 0) return e;
  double s = 0.0;
  for (const auto& t : e.terms) s += t.value;
  e.mean = s / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (const auto& t : e.terms) ss += (t.value - e.mean) * (t.value - e.mean);
    e.standard_error = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  }
  return e;
}

KlEstimate kl_to_reference(const lm::ModelParams& policy, const lm::ModelParams& reference,
                           std::span<const lm::TokenSequence> prompts, const KlOptions& options) {
  if (prompts.empty()) throw UsageError("kl_to_reference: no prompts");
  if (options.samples_per_prompt < 1) throw UsageError("kl_to_reference: samples_per_prompt < 1");
  lm::Scorer pol(policy);
  lm::Scorer ref(reference);
  std::vector<KlTerm> terms;
  terms.reserve(prompts.size() * options.samples_per_prompt);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    for (std::size_t j = 0; j < options.samples_per_prompt; ++j) {
      lm::SampleOptions so;
      so.max_new_tokens = options.max_new_tokens;
      so.eos = options.eos;
      so.seed = numerics::derive_seed(options.seed, {i, j});
      const lm::TokenSequence y = lm::sample(pol, prompts[i], so);
      if (y.empty()) throw Error("kl_to_reference: prompt " + std::to_string(i) + " fills the context");
      terms.push_back({i, pol.logprob(prompts[i], y) - ref.logprob(prompts[i], y)});
    }
  }
  return summarize_kl(std::move(terms));
}

EvalReport build_report(const ReportInputs& in) {
  std::set<std::string> cats;
  if (in.preference) {
    for (const auto& r : in.preference->records) cats.insert(r.category);
  }
  if (in.mc) {
    for (const auto& [c, _] : in.mc->per_category) cats.insert(c);
  }
  if (in.kl) {
    for (const auto& t : in.kl->terms) {
      if (t.prompt < in.kl_prompt_categories.size()) cats.insert(in.kl_prompt_categories[t.prompt]);
    }
  }

  // category == nullptr selects everything.
  auto make_row = [&](const std::string* category) {
    ReportRow row;
    row.scope = category ? "category" : "overall";
    row.category = category ? *category : "all";
    std::size_t n_pref = 0;
    if (in.preference) {
      Tally t;
      double margin_sum = 0.0;
      for (const auto& r : in.preference->records) {
        if (category && r.category != *category) continue;
        t.total += 1;
        t.correct += r.correct ? 1 : 0;
        margin_sum += r.margin;
      }
      n_pref = t.total;
      if (t.total > 0) {
        row.preference_acc = t.fraction();
        row.mean_margin = margin_sum / static_cast<double>(t.total);
      }
    }
    std::size_t n_mc = 0;
    if (in.mc) {
      Tally t;
      if (category) {
        const auto it = in.mc->per_category.find(*category);
        if (it != in.mc->per_category.end()) t = it->second;
      } else {
        t = in.mc->overall;
      }
      n_mc = t.total;
      if (t.total > 0) row.mc_acc = t.fraction();
    }
    if (in.kl) {
      std::vector<KlTerm> sel;
      for (const auto& term : in.kl->terms) {
        if (category) {
          if (term.prompt >= in.kl_prompt_categories.size() ||
              in.kl_prompt_categories[term.prompt] != *category) {
            continue;
          }
        }
        sel.push_back(term);
      }
      if (!sel.empty()) {
        const KlEstimate e = category ? summarize_kl(std::move(sel)) : *in.kl;
        row.kl = e.mean;
        row.kl_se = e.standard_error;
      }
    }
    row.n = in.preference ? n_pref : n_mc;
    return row;
  };

  EvalReport report;
  report.rows.push_back(make_row(nullptr));
  for (const auto& c : cats) report.rows.push_back(make_row(&c));
  return report;
}

namespace {

std::string cell(const std::optional<double>& v) {
  return v ? numerics::format_double(*v) : "";
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_cell(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error("report CSV: bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << kReportHeader << '\n';
  for (const auto& r : report.rows) {
    out << r.scope << ',' << r.category << ',' << r.n << ',' << cell(r.preference_acc) << ','
        << cell(r.mc_acc) << ',' << cell(r.mean_margin) << ',' << cell(r.kl) << ','
        << cell(r.kl_se) << '\n';
  }
  return out.str();
}

EvalReport parse_report_csv(std::string_view text) {
  EvalReport report;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    if (header) {
      if (line != kReportHeader) throw Error("report CSV: unexpected header");
      header = false;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw Error("report CSV: expected 8 fields");
    ReportRow r;
    r.scope = f[0];
    r.category = f[1];
    std::size_t n = 0;
    const auto res = std::from_chars(f[2].data(), f[2].data() + f[2].size(), n);
    if (res.ec != std::errc()) throw Error("report CSV: bad count '" + f[2] + "'");
    r.n = n;
    r.preference_acc = parse_cell(f[3]);
    r.mc_acc = parse_cell(f[4]);
    r.mean_margin = parse_cell(f[5]);
    r.kl = parse_cell(f[6]);
    r.kl_se = parse_cell(f[7]);
    report.rows.push_back(std::move(r));
  }
  if (header) throw Error("report CSV: missing header");
  return report;
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << report_csv(report);
}

EvalSummary evaluate(const lm::ModelParams& policy, const lm::ModelParams& reference,
                     const lm::Vocabulary& vocab, std::span<const data::PreferenceTriple> triples,
                     const std::vector<data::MultipleChoiceItem>* mc_items,
                     const EvalOptions& options) {
  EvalSummary s;
  s.preference = preference_accuracy(policy, reference, vocab, triples, options.beta);
  if (mc_items != nullptr) s.mc = mc_accuracy(policy, vocab, *mc_items, options.normalization);

  std::vector<lm::TokenSequence> prompts;
  std::vector<std::string> cats;
  for (const auto& t : triples) {
    prompts.push_back(vocab.encode(t.prompt));
    cats.push_back(t.category.value_or(std::string(kUncategorized)));
  }
  KlOptions kl = options.kl;
  if (!kl.eos) kl.eos = vocab.eos();
  s.kl = kl_to_reference(policy, reference, prompts, kl);

  ReportInputs in;
  in.preference = &s.preference;
  in.mc = s.mc ? &*s.mc : nullptr;
  in.kl = &s.kl;
  in.kl_prompt_categories = std::move(cats);
  s.report = build_report(in);
  return s;
}

}  // namespace prefalign::eval
