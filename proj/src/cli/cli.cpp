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

#include "prefalign/cli/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "prefalign/data/dataset.hpp"
#include "prefalign/data/synth.hpp"
#include "prefalign/error.hpp"
#include "prefalign/eval/metrics.hpp"
#include "prefalign/lm/checkpoint.hpp"
#include "prefalign/numerics/hash.hpp"
#include "prefalign/trainer/trainer.hpp"
#include "prefalign/version.hpp"
#include "spdlog/sinks/stdout_color_sinks.h"
#include "spdlog/spdlog.h"

namespace prefalign::cli {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path manifest_path(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }
fs::path metrics_path(const fs::path& out) { return fs::path(out.string() + ".metrics.csv"); }

namespace {

// Plain key=value lines; keys are the long flag names of the active command.
class KeyValueConfig : public CLI::ConfigBase {
 public:
  std::string command;

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigBase::from_config(input);
    for (auto& item : items) {
      if (item.name == "++" || item.name == "--") continue;
      if (item.parents.empty() && !command.empty()) item.parents = {command};
      for (char& c : item.name) {
        if (c == '_') c = '-';
      }
    }
    return items;
  }
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  Manifest(fs::path path, const std::string& command, const std::vector<std::string>& args)
      : path_(std::move(path)) {
    j_["command"] = command;
    j_["argv"] = args;
    j_["version"] = std::string(kVersion);
    j_["started_at"] = utc_now();
    j_["finished_at"] = nullptr;
    j_["status"] = "running";
    j_["inputs"] = json::array();
    j_["outputs"] = json::array();
  }

  json& operator[](const char* key) { return j_[key]; }

  void input(const fs::path& p) {
    j_["inputs"].push_back({{"path", p.string()}, {"sha256", numerics::sha256_file(p)}});
  }
  void output(const fs::path& p) { j_["outputs"].push_back(p.string()); }

  void write() const {
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write manifest " + path_.string());
    out << j_.dump(2) << '\n';
  }

  void finish(bool ok, const std::string& error = {}) {
    j_["finished_at"] = utc_now();
    j_["status"] = ok ? "ok" : "failed";
    if (!ok) j_["error"] = error;
    write();
  }

 private:
  fs::path path_;
  json j_;
};

struct Context {
  std::vector<std::string> args;
  std::optional<Manifest> manifest;

  Manifest& open_manifest(const fs::path& path, const std::string& command) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    manifest.emplace(path, command, args);
    return *manifest;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) throw Error(std::string(what) + " not found: " + path.string());
}

std::vector<std::string> read_corpus(const fs::path& path) {
  require_file(path, "corpus");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read corpus " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw Error("corpus " + path.string() + " has no sentences");
  return lines;
}

void write_corpus(const fs::path& path, const std::vector<std::string>& corpus) {
  std::string text;
  for (const auto& s : corpus) text += s + '\n';
  write_text(path, text);
}

// Saves and reads back, failing unless the round trip is exact.
void save_verified(const fs::path& path, const lm::ModelParams& params,
                   const std::optional<lm::Vocabulary>& vocab) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  lm::save_checkpoint(path, params, vocab);
  const lm::Checkpoint back = lm::load_checkpoint(path);
  if (!(back.params.config == params.config) ||
      !back.params.weights.bit_identical(params.weights)) {
    throw Error("checkpoint verification failed: " + path.string());
  }
}

struct LoadedModel {
  lm::ModelParams params;
  lm::Vocabulary vocab;
};

LoadedModel load_model(const fs::path& path, const char* what) {
  require_file(path, what);
  lm::Checkpoint c = lm::load_checkpoint(path);
  if (!c.vocab) throw Error(std::string(what) + " " + path.string() + " carries no vocabulary");
  return {std::move(c.params), std::move(*c.vocab)};
}

json model_config_json(const lm::ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"embed_dim", c.embed_dim},
          {"num_layers", c.num_layers},
          {"num_heads", c.num_heads},
          {"context_length", c.context_length},
          {"feedforward_dim", c.feedforward_dim},
          {"seed", c.seed}};
}

lm::ModelConfig read_model_config(const fs::path& path) {
  require_file(path, "model config");
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw UsageError("model config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("model config " + path.string() + ": expected an object");
  lm::ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    std::size_t* field = nullptr;
    if (key == "embed_dim") field = &c.embed_dim;
    if (key == "num_layers") field = &c.num_layers;
    if (key == "num_heads") field = &c.num_heads;
    if (key == "context_length") field = &c.context_length;
    if (key == "feedforward_dim") field = &c.feedforward_dim;
    if (field == nullptr) throw UsageError("model config: unknown key '" + key + "'");
    if (!value.is_number_unsigned()) {
      throw UsageError("model config: '" + key + "' must be a non-negative integer");
    }
    *field = value.get<std::size_t>();
  }
  return c;
}

data::PreferenceDataset load_split(const fs::path& path, const lm::Vocabulary& vocab,
                                   std::size_t context, double heldout_fraction,
                                   std::uint64_t seed, Manifest* manifest) {
  require_file(path, "preference data");
  data::LoadResult loaded = data::load_preferences(path, &vocab, context);
  if (!loaded.rejects.empty()) {
    spdlog::warn("{}: {} record(s) rejected, see {}", path.string(), loaded.rejects.size(),
                 data::rejects_report_path(path).string());
  }
  if (manifest != nullptr) {
    (*manifest)["dataset"] = {{"records", loaded.dataset.triples.size()},
                              {"rejects", loaded.rejects.size()},
                              {"hash", data::dataset_hash(loaded.dataset.triples)}};
  }
  if (heldout_fraction == 0.0) return std::move(loaded.dataset);
  return data::split(std::move(loaded.dataset), heldout_fraction, seed);
}

// ---- commands ----

struct GenDataArgs {
  std::uint64_t seed = 0;
  std::size_t n_pairs = 200;
  std::string out_dir;
  std::string scheme = "word";
};

void cmd_gen_data(const GenDataArgs& a, Context& ctx) {
  const fs::path dir(a.out_dir);
  const lm::TokenScheme scheme = lm::parse_token_scheme(a.scheme);
  if (a.n_pairs < data::kMinSynthPairs) {
    throw UsageError("--n-pairs must be at least " + std::to_string(data::kMinSynthPairs));
  }
  fs::create_directories(dir);
  Manifest& m = ctx.open_manifest(dir / "gen-data.manifest.json", "gen-data");
  m["config"] = {{"seed", a.seed}, {"n_pairs", a.n_pairs}, {"scheme", a.scheme}};
  m.write();

  const data::SynthData d = data::synth_generate(a.seed, a.n_pairs, scheme);
  write_corpus(dir / "corpus.txt", d.corpus);
  data::write_preferences(dir / "prefs.jsonl", d.preferences.triples);
  data::write_mc_items(dir / "mc_items.jsonl", d.mc_items);

  // Validate what was written.
  const data::LoadResult back = data::load_preferences(dir / "prefs.jsonl", &d.vocab, 0, false);
  if (!back.rejects.empty() || back.dataset.triples != d.preferences.triples) {
    throw Error("generated preferences failed validation");
  }
  if (data::load_mc_items(dir / "mc_items.jsonl") != d.mc_items) {
    throw Error("generated multiple-choice items failed validation");
  }
  for (const char* name : {"corpus.txt", "prefs.jsonl", "mc_items.jsonl"}) m.output(dir / name);
  spdlog::info("wrote {} sentences, {} pairs, {} items to {}", d.corpus.size(),
               d.preferences.triples.size(), d.mc_items.size(), dir.string());
}

struct PretrainArgs {
  std::string corpus;
  std::string model_config;
  std::size_t steps = 500;
  double lr = 1e-3;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  std::string scheme = "word";
  std::string out;
};

void cmd_pretrain(const PretrainArgs& a, Context& ctx) {
  if (a.steps < 1) throw UsageError("--steps must be >= 1");
  if (a.batch_size < 1) throw UsageError("--batch-size must be >= 1");
  const lm::TokenScheme scheme = lm::parse_token_scheme(a.scheme);
  lm::ModelConfig config = a.model_config.empty() ? lm::ModelConfig{}
                                                   : read_model_config(a.model_config);
  const auto corpus = read_corpus(a.corpus);
  const lm::Vocabulary vocab = lm::Vocabulary::build(scheme, corpus);
  config.vocab_size = vocab.size();
  config.seed = a.seed;
  config.validate();

  const fs::path out(a.out);
  Manifest& m = ctx.open_manifest(manifest_path(out), "pretrain");
  m["config"] = {{"model", model_config_json(config)}, {"steps", a.steps},
                 {"learning_rate", a.lr},             {"batch_size", a.batch_size},
                 {"seed", a.seed},                    {"scheme", a.scheme}};
  m.input(a.corpus);
  m.write();

  trainer::PretrainOptions opts;
  opts.steps = a.steps;
  opts.learning_rate = a.lr;
  opts.batch_size = a.batch_size;
  opts.seed = a.seed;
  opts.on_step = [&](std::size_t step, double loss) {
    if ((step + 1) % 100 == 0 || step + 1 == a.steps) {
      spdlog::info("pretrain step {}/{}: loss={:.6f}", step + 1, a.steps, loss);
    }
  };
  const double ppl_init = trainer::corpus_perplexity(lm::init_params(config), vocab, corpus);
  const lm::ModelParams params = trainer::pretrain(corpus, vocab, config, opts);
  const double ppl_final = trainer::corpus_perplexity(params, vocab, corpus);
  spdlog::info("corpus perplexity {:.4f} -> {:.4f}", ppl_init, ppl_final);

  save_verified(out, params, vocab);
  m["results"] = {{"perplexity_init", ppl_init},
                  {"perplexity_final", ppl_final},
                  {"params_sha256", params.weights.sha256()}};
  m.output(out);
}

struct LossArgs {
  std::string loss = "dpo";
  double beta = 0.1;
  std::optional<double> delta;
  std::string zref = "batch_kl";
  std::string slic_target = "chosen";
  double w_desirable = 1.0;
  double w_undesirable = 1.0;
};

struct TrainArgs {
  std::size_t epochs = 5;
  double lr = 1e-6;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  double heldout_fraction = 0.2;
  std::size_t kl_samples = 4;
  std::size_t kl_max_new_tokens = 16;
  std::optional<double> max_grad_norm;
};

void add_train_options(CLI::App* app, TrainArgs& t) {
  app->add_option("--epochs", t.epochs, "training epochs")->capture_default_str();
  app->add_option("--lr", t.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--batch-size", t.batch_size, "examples per update")->capture_default_str();
  app->add_option("--seed", t.seed, "seed for the split, shuffling and sampling")
      ->capture_default_str();
  app->add_option("--heldout-fraction", t.heldout_fraction,
                  "fraction of pairs held out (0 disables the split)")
      ->capture_default_str();
  app->add_option("--kl-samples", t.kl_samples, "KL samples per prompt")->capture_default_str();
  app->add_option("--kl-max-new-tokens", t.kl_max_new_tokens, "KL sample length cap")
      ->capture_default_str();
  app->add_option("--max-grad-norm", t.max_grad_norm, "clip gradients to this L2 norm");
}

trainer::TrainConfig make_train_config(const TrainArgs& t) {
  if (!(t.heldout_fraction >= 0.0 && t.heldout_fraction < 1.0)) {
    throw UsageError("--heldout-fraction must lie in [0, 1)");
  }
  trainer::TrainConfig c;
  c.epochs = t.epochs;
  c.learning_rate = t.lr;
  c.batch_size = t.batch_size;
  c.seed = t.seed;
  c.kl_samples_per_prompt = t.kl_samples;
  c.kl_max_new_tokens = t.kl_max_new_tokens;
  c.max_grad_norm = t.max_grad_norm;
  return c;
}

struct AlignArgs {
  std::string base;
  std::string data;
  std::string out;
  LossArgs loss;
  TrainArgs train;
  std::optional<std::size_t> checkpoint_every;
};

void cmd_align(const AlignArgs& a, Context& ctx) {
  trainer::TrainConfig config = make_train_config(a.train);
  config.checkpoint_every = a.checkpoint_every;
  config.loss.variant = prefloss::parse_loss_variant(a.loss.loss);
  config.loss.beta = a.loss.beta;
  config.loss.delta = a.loss.delta;
  config.loss.zref_policy = prefloss::parse_zref_policy(a.loss.zref);
  config.loss.slic_target = prefloss::parse_slic_target(a.loss.slic_target);
  config.loss.w_desirable = a.loss.w_desirable;
  config.loss.w_undesirable = a.loss.w_undesirable;
  if (config.loss.variant == prefloss::LossVariant::kSlic && !config.loss.delta) {
    throw UsageError("--loss slic requires --delta");
  }
  if (config.loss.variant != prefloss::LossVariant::kSlic && config.loss.delta) {
    throw UsageError("--delta applies only to --loss slic");
  }
  config.validate();

  const LoadedModel base = load_model(a.base, "base checkpoint");
  const fs::path out(a.out);
  Manifest& m = ctx.open_manifest(manifest_path(out), "align");
  m["config"] = {{"train", trainer::to_json(config)},
                 {"heldout_fraction", a.train.heldout_fraction}};
  m["seeds"] = {{"seed", config.seed}};
  m.input(a.base);
  m.input(a.data);
  const data::PreferenceDataset dataset =
      load_split(a.data, base.vocab, base.params.config.context_length,
                 a.train.heldout_fraction, config.seed, &m);
  m.write();

  auto on_checkpoint = [&](std::size_t epoch, const lm::ModelParams& policy) {
    const fs::path p(out.string() + ".epoch" + std::to_string(epoch));
    save_verified(p, policy, base.vocab);
    m.output(p);
  };
  const trainer::TrainResult r =
      trainer::preference_train(base.params, base.vocab, dataset, config, on_checkpoint);

  save_verified(out, r.policy, base.vocab);
  write_text(metrics_path(out), trainer::metrics_csv(r.metrics));
  if (read_text(metrics_path(out)) != trainer::metrics_csv(r.metrics)) {
    throw Error("metrics verification failed");
  }
  json epochs = json::array();
  for (const auto& e : r.metrics.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"loss", e.loss},
                      {"margin", e.margin},
                      {"train_acc", e.train_acc},
                      {"heldout_acc", e.heldout_acc},
                      {"kl", e.kl},
                      {"kl_se", e.kl_se},
                      {"seconds", e.seconds}});
  }
  m["results"] = {{"epochs", epochs},
                  {"first_batch_loss", *r.metrics.first_batch_loss},
                  {"reference_sha256_before", r.reference_hash_before},
                  {"reference_sha256_after", r.reference_hash_after},
                  {"policy_sha256", r.policy.weights.sha256()}};
  m.output(out);
  m.output(metrics_path(out));
}

std::vector<prefloss::LossVariant> parse_variants(const std::vector<std::string>& names) {
  std::vector<prefloss::LossVariant> out;
  for (const auto& n : names) out.push_back(prefloss::parse_loss_variant(n));
  return out;
}

struct SweepArgs {
  std::string base;
  std::string data;
  std::string mc_items;
  std::string out;
  std::vector<std::string> losses{"dpo", "ipo", "slic", "kto"};
  std::vector<double> betas{std::begin(trainer::kDefaultBetas), std::end(trainer::kDefaultBetas)};
  double delta = trainer::kDefaultSlicDelta;
  std::string zref = "batch_kl";
  std::string slic_target = "chosen";
  double w_desirable = 1.0;
  double w_undesirable = 1.0;
  std::string normalization = "per_token";
  std::size_t jobs = 1;
  TrainArgs train;
};

void cmd_sweep(const SweepArgs& a, Context& ctx) {
  trainer::SweepOptions opts;
  opts.variants = parse_variants(a.losses);
  opts.betas = a.betas;
  opts.slic_delta = a.delta;
  opts.jobs = a.jobs;
  opts.train = make_train_config(a.train);
  opts.train.loss.zref_policy = prefloss::parse_zref_policy(a.zref);
  opts.train.loss.slic_target = prefloss::parse_slic_target(a.slic_target);
  opts.train.loss.w_desirable = a.w_desirable;
  opts.train.loss.w_undesirable = a.w_undesirable;
  opts.eval.normalization = eval::parse_mc_normalization(a.normalization);
  opts.eval.kl.samples_per_prompt = a.train.kl_samples;
  opts.eval.kl.max_new_tokens = a.train.kl_max_new_tokens;
  opts.eval.kl.seed = a.train.seed;
  if (opts.variants.empty()) throw UsageError("--losses is empty");
  if (opts.betas.empty()) throw UsageError("--betas is empty");
  for (double b : opts.betas) {
    if (!(b > 0.0)) throw UsageError("--betas values must be > 0");
  }
  if (!(a.delta > 0.0)) throw UsageError("--delta must be > 0");
  if (a.jobs < 1) throw UsageError("--jobs must be >= 1");
  opts.train.validate();

  const LoadedModel base = load_model(a.base, "base checkpoint");
  const fs::path out(a.out);
  Manifest& m = ctx.open_manifest(manifest_path(out), "sweep");
  json variants = json::array();
  for (auto v : opts.variants) variants.push_back(std::string(prefloss::to_string(v)));
  m["config"] = {{"train", trainer::to_json(opts.train)},
                 {"variants", variants},
                 {"betas", opts.betas},
                 {"slic_delta", opts.slic_delta},
                 {"heldout_fraction", a.train.heldout_fraction},
                 {"normalization", a.normalization},
                 {"jobs", a.jobs}};
  m["seeds"] = {{"seed", a.train.seed}};
  m.input(a.base);
  m.input(a.data);
  std::optional<std::vector<data::MultipleChoiceItem>> mc;
  if (!a.mc_items.empty()) {
    require_file(a.mc_items, "multiple-choice items");
    mc = data::load_mc_items(a.mc_items);
    m.input(a.mc_items);
  }
  const data::PreferenceDataset dataset =
      load_split(a.data, base.vocab, base.params.config.context_length,
                 a.train.heldout_fraction, a.train.seed, &m);
  m.write();

  const auto cells = trainer::beta_sweep(base.params, base.vocab, dataset, mc ? &*mc : nullptr,
                                         opts);
  write_text(out, trainer::sweep_csv(cells));
  std::size_t failed = 0;
  json rows = json::array();
  for (const auto& c : cells) {
    failed += c.ok ? 0 : 1;
    json row = {{"variant", std::string(prefloss::to_string(c.variant))},
                {"beta", c.beta},
                {"status", c.ok ? "ok" : "failed"}};
    if (c.ok) {
      row["heldout_acc"] = c.heldout_acc;
      row["mc_acc"] = c.mc_acc ? json(*c.mc_acc) : json(nullptr);
      row["kl"] = c.kl;
      row["kl_se"] = c.kl_se;
    } else {
      row["error"] = c.error;
    }
    rows.push_back(row);
  }
  m["results"] = {{"cells", rows}, {"failed_cells", failed}};
  m.output(out);
  spdlog::info("sweep: {} cells, {} failed", cells.size(), failed);
}

struct EvalArgs {
  std::string model;
  std::string ref;
  std::string data;
  std::string mc_items;
  std::string out;
  double beta = 0.1;
  std::string split = "heldout";
  double heldout_fraction = 0.2;
  std::uint64_t seed = 0;
  std::string normalization = "per_token";
  std::size_t kl_samples = 4;
  std::size_t kl_max_new_tokens = 16;
};

void cmd_eval(const EvalArgs& a, Context& ctx) {
  if (!(a.beta > 0.0)) throw UsageError("--beta must be > 0");
  if (a.split != "all" && a.split != "train" && a.split != "heldout") {
    throw UsageError("--split must be all, train or heldout");
  }
  if (a.split != "all" && !(a.heldout_fraction > 0.0 && a.heldout_fraction < 1.0)) {
    throw UsageError("--heldout-fraction must lie in (0, 1) with --split " + a.split);
  }
  if (a.kl_samples < 1) throw UsageError("--kl-samples must be >= 1");
  eval::EvalOptions opts;
  opts.beta = a.beta;
  opts.normalization = eval::parse_mc_normalization(a.normalization);
  opts.kl.samples_per_prompt = a.kl_samples;
  opts.kl.max_new_tokens = a.kl_max_new_tokens;
  opts.kl.seed = a.seed;

  const LoadedModel policy = load_model(a.model, "model checkpoint");
  const LoadedModel reference = load_model(a.ref, "reference checkpoint");
  if (policy.vocab.tokens() != reference.vocab.tokens()) {
    throw Error("model and reference vocabularies differ");
  }
  if (!(policy.params.config.vocab_size == reference.params.config.vocab_size)) {
    throw Error("model and reference shapes differ");
  }
  const fs::path out(a.out);
  Manifest& m = ctx.open_manifest(manifest_path(out), "eval");
  m["config"] = {{"beta", a.beta},
                 {"split", a.split},
                 {"heldout_fraction", a.heldout_fraction},
                 {"normalization", a.normalization},
                 {"kl_samples", a.kl_samples},
                 {"kl_max_new_tokens", a.kl_max_new_tokens}};
  m["seeds"] = {{"seed", a.seed}};
  m.input(a.model);
  m.input(a.ref);
  m.input(a.data);
  std::optional<std::vector<data::MultipleChoiceItem>> mc;
  if (!a.mc_items.empty()) {
    require_file(a.mc_items, "multiple-choice items");
    mc = data::load_mc_items(a.mc_items);
    m.input(a.mc_items);
  }
  const data::PreferenceDataset dataset =
      load_split(a.data, policy.vocab, policy.params.config.context_length,
                 a.split == "all" ? 0.0 : a.heldout_fraction, a.seed, &m);
  m.write();
  const std::vector<data::PreferenceTriple> triples =
      a.split == "all"     ? dataset.triples
      : a.split == "train" ? dataset.subset(data::Split::kTrain)
                           : dataset.subset(data::Split::kHeldout);

  const eval::EvalSummary s = eval::evaluate(policy.params, reference.params, policy.vocab,
                                             triples, mc ? &*mc : nullptr, opts);
  eval::write_report_csv(out, s.report);
  if (eval::parse_report_csv(read_text(out)) != s.report) {
    throw Error("report verification failed");
  }
  m["results"] = {{"preference_acc", s.preference.fraction()},
                  {"mc_acc", s.mc ? json(s.mc->overall.fraction()) : json(nullptr)},
                  {"kl", s.kl.mean},
                  {"kl_se", s.kl.standard_error}};
  m.output(out);
}

void configure_logging() {
  auto logger = spdlog::get("prefalign");
  if (!logger) {
    logger = spdlog::stderr_color_mt("prefalign");
    spdlog::set_default_logger(logger);
  }
  const char* env = std::getenv("PREFALIGN_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "info" || level.empty()) {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    throw UsageError("PREFALIGN_LOG must be error, info or debug (got '" + level + "')");
  }
}

std::string find_command(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      ++i;
      continue;
    }
    if (!args[i].empty() && args[i][0] != '-') return args[i];
  }
  return {};
}

}  // namespace

int run(const std::vector<std::string>& args) {
  Context ctx;
  ctx.args = args;
  try {
    configure_logging();

    CLI::App app{"Preference alignment of a small transformer language model", "prefalign"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));
    auto config_format = std::make_shared<KeyValueConfig>();
    config_format->command = find_command(args);
    app.config_formatter(config_format);
    app.set_config("--config", "", "key=value file of defaults for the command's flags");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.fallthrough();

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "write a synthetic corpus, preferences and "
                                                   "multiple-choice items");
    gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
    gen_cmd->add_option("--n-pairs", gen.n_pairs)->capture_default_str();
    gen_cmd->add_option("--out-dir", gen.out_dir)->required();
    gen_cmd->add_option("--scheme", gen.scheme, "word or char")->capture_default_str();

    PretrainArgs pre;
    auto* pre_cmd = app.add_subcommand("pretrain", "train a base model on a corpus");
    pre_cmd->add_option("--corpus", pre.corpus)->required();
    pre_cmd->add_option("--model-config", pre.model_config, "JSON object of model sizes");
    pre_cmd->add_option("--steps", pre.steps)->capture_default_str();
    pre_cmd->add_option("--lr", pre.lr)->capture_default_str();
    pre_cmd->add_option("--batch-size", pre.batch_size)->capture_default_str();
    pre_cmd->add_option("--seed", pre.seed)->capture_default_str();
    pre_cmd->add_option("--scheme", pre.scheme, "word or char")->capture_default_str();
    pre_cmd->add_option("--out", pre.out)->required();

    AlignArgs al;
    auto* al_cmd = app.add_subcommand("align", "preference-train a policy from a base model");
    al_cmd->add_option("--base", al.base)->required();
    al_cmd->add_option("--data", al.data)->required();
    al_cmd->add_option("--out", al.out)->required();
    al_cmd->add_option("--loss", al.loss.loss, "dpo, ipo, slic or kto")->capture_default_str();
    al_cmd->add_option("--beta", al.loss.beta)->capture_default_str();
    al_cmd->add_option("--delta", al.loss.delta, "SLiC hinge margin (required for slic)");
    al_cmd->add_option("--zref", al.loss.zref, "KTO reference reward: batch_kl or zero")
        ->capture_default_str();
    al_cmd->add_option("--slic-target", al.loss.slic_target, "chosen or external_target")
        ->capture_default_str();
    al_cmd->add_option("--w-desirable", al.loss.w_desirable)->capture_default_str();
    al_cmd->add_option("--w-undesirable", al.loss.w_undesirable)->capture_default_str();
    al_cmd->add_option("--checkpoint-every", al.checkpoint_every, "epochs between checkpoints");
    add_train_options(al_cmd, al.train);

    SweepArgs sw;
    auto* sw_cmd = app.add_subcommand("sweep", "train and evaluate a (loss, beta) grid");
    sw_cmd->add_option("--base", sw.base)->required();
    sw_cmd->add_option("--data", sw.data)->required();
    sw_cmd->add_option("--out", sw.out, "sweep CSV")->required();
    sw_cmd->add_option("--mc-items", sw.mc_items);
    sw_cmd->add_option("--losses", sw.losses)->delimiter(',')->capture_default_str();
    sw_cmd->add_option("--betas", sw.betas)->delimiter(',')->capture_default_str();
    sw_cmd->add_option("--delta", sw.delta, "SLiC hinge margin")->capture_default_str();
    sw_cmd->add_option("--zref", sw.zref)->capture_default_str();
    sw_cmd->add_option("--slic-target", sw.slic_target)->capture_default_str();
    sw_cmd->add_option("--w-desirable", sw.w_desirable)->capture_default_str();
    sw_cmd->add_option("--w-undesirable", sw.w_undesirable)->capture_default_str();
    sw_cmd->add_option("--normalization", sw.normalization, "none or per_token")
        ->capture_default_str();
    sw_cmd->add_option("--jobs", sw.jobs, "cells trained in parallel")->capture_default_str();
    add_train_options(sw_cmd, sw.train);

    EvalArgs ev;
    auto* ev_cmd = app.add_subcommand("eval", "score a model against a reference");
    ev_cmd->add_option("--model", ev.model)->required();
    ev_cmd->add_option("--ref", ev.ref)->required();
    ev_cmd->add_option("--data", ev.data)->required();
    ev_cmd->add_option("--out", ev.out, "report CSV")->required();
    ev_cmd->add_option("--mc-items", ev.mc_items);
    ev_cmd->add_option("--beta", ev.beta)->capture_default_str();
    ev_cmd->add_option("--split", ev.split, "all, train or heldout")->capture_default_str();
    ev_cmd->add_option("--heldout-fraction", ev.heldout_fraction)->capture_default_str();
    ev_cmd->add_option("--seed", ev.seed)->capture_default_str();
    ev_cmd->add_option("--normalization", ev.normalization, "none or per_token")
        ->capture_default_str();
    ev_cmd->add_option("--kl-samples", ev.kl_samples)->capture_default_str();
    ev_cmd->add_option("--kl-max-new-tokens", ev.kl_max_new_tokens)->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e, std::cout, std::cerr), kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e, std::cout, std::cerr), kExitOk;
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e, std::cout, std::cerr), kExitOk;
    } catch (const CLI::ParseError& e) {
      app.exit(e, std::cout, std::cerr);
      return kExitUsage;
    }

    if (gen_cmd->parsed()) cmd_gen_data(gen, ctx);
    if (pre_cmd->parsed()) cmd_pretrain(pre, ctx);
    if (al_cmd->parsed()) cmd_align(al, ctx);
    if (sw_cmd->parsed()) cmd_sweep(sw, ctx);
    if (ev_cmd->parsed()) cmd_eval(ev, ctx);
    if (ctx.manifest) ctx.manifest->finish(true);
    return kExitOk;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    if (ctx.manifest) ctx.manifest->finish(false, e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    try {
      if (ctx.manifest) ctx.manifest->finish(false, e.what());
    } catch (const std::exception&) {
    }
    return kExitRuntime;
  }
}

}  // namespace prefalign::cli
