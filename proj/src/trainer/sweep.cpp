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

#include <atomic>
#include <exception>
#include <sstream>
#include <thread>

#include "prefalign/error.hpp"
#include "prefalign/numerics/format.hpp"
#include "prefalign/trainer/trainer.hpp"
#include "spdlog/spdlog.h"

namespace prefalign::trainer {

namespace {

SweepCell run_cell(const lm::ModelParams& base, const lm::Vocabulary& vocab,
                   const data::PreferenceDataset& dataset,
                   const std::vector<data::MultipleChoiceItem>* mc_items,
                   const SweepOptions& options, prefloss::LossVariant variant, double beta) {
  SweepCell cell;
  cell.variant = variant;
  cell.beta = beta;
  try {
    TrainConfig config = options.train;
    config.loss.variant = variant;
    config.loss.beta = beta;
    if (variant == prefloss::LossVariant::kSlic) {
      if (!config.loss.delta) config.loss.delta = options.slic_delta;
    } else {
      config.loss.delta.reset();
    }
    const TrainResult trained = preference_train(base, vocab, dataset, config);

    const auto triples = dataset.is_split() ? dataset.subset(data::Split::kHeldout)
                                            : dataset.subset(data::Split::kTrain);
    eval::EvalOptions eval_opts = options.eval;
    eval_opts.beta = beta;
    const eval::EvalSummary s =
        eval::evaluate(trained.policy, base, vocab, triples, mc_items, eval_opts);
    cell.heldout_acc = s.preference.fraction();
    if (s.mc) cell.mc_acc = s.mc->overall.fraction();
    cell.kl = s.kl.mean;
    cell.kl_se = s.kl.standard_error;
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
    spdlog::error("sweep cell {} beta={} failed: {}", prefloss::to_string(variant), beta,
                  e.what());
  }
  return cell;
}

}  // namespace

std::vector<SweepCell> beta_sweep(const lm::ModelParams& base, const lm::Vocabulary& vocab,
                                  const data::PreferenceDataset& dataset,
                                  const std::vector<data::MultipleChoiceItem>* mc_items,
                                  const SweepOptions& options) {
  if (options.variants.empty()) throw UsageError("sweep: no loss variants");
  if (options.betas.empty()) throw UsageError("sweep: no beta values");
  for (double b : options.betas) {
    if (!(b > 0.0)) throw UsageError("sweep: beta values must be > 0");
  }
  if (!(options.slic_delta > 0.0)) throw UsageError("sweep: SLiC delta must be > 0");

  std::vector<std::pair<prefloss::LossVariant, double>> grid;
  for (auto v : options.variants) {
    for (double b : options.betas) grid.emplace_back(v, b);
  }
  std::vector<SweepCell> cells(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      cells[i] = run_cell(base, vocab, dataset, mc_items, options, grid[i].first, grid[i].second);
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, grid.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  return cells;
}

std::string sweep_csv(std::span<const SweepCell> cells) {
  using numerics::format_double;
  std::ostringstream out;
  out << kSweepHeader << '\n';
  for (const auto& c : cells) {
    out << prefloss::to_string(c.variant) << ',' << format_double(c.beta) << ',';
    if (c.ok) {
      out << format_double(c.heldout_acc) << ',' << (c.mc_acc ? format_double(*c.mc_acc) : "")
          << ',' << format_double(c.kl) << ",ok\n";
    } else {
      out << ",,,failed\n";
    }
  }
  return out.str();
}

}  // namespace prefalign::trainer
