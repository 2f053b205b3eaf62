// Copyright 2026 The embedlab Authors.
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

#include "cli.h"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "CLI11.hpp"
#include "embedlab/checkpoint.h"
#include "embedlab/errors.h"
#include "embedlab/eval.h"
#include "embedlab/trainer.h"
#include "run_config.h"

namespace embedlab::cli {
namespace {

namespace fs = std::filesystem;

// 0 = results only, 1 = progress (default), 2 = every step.
int verbosity() {
  const char* v = std::getenv("EMBEDLAB_VERBOSITY");
  if (v == nullptr) return 1;
  int level = 1;
  std::from_chars(v, v + std::char_traits<char>::length(v), level);
  return level;
}

// Flag values; each is applied over the config file only if given.
struct Flags {
  std::string config;
  std::uint64_t seed;
  double lr;
  std::string objective;
  std::string prompt;
  int shards;
  std::string out;
  int batch_size;
  int epochs;
  int warmup;
  std::string triplets;
  std::vector<std::string> sts;
  std::string checkpoint;
  std::string checkpoint_dir;
  std::string input;
  std::string scores;
  std::string resume;
};

struct Options {
  std::map<std::string, CLI::Option*> by_name;
  bool given(const std::string& name) const {
    auto it = by_name.find(name);
    return it != by_name.end() && it->second->count() > 0;
  }
};

void add_common(CLI::App* app, Flags& f, Options& o) {
  o.by_name["config"] =
      app->add_option("--config", f.config, "JSON run configuration file")
          ->check(CLI::ExistingFile);
  o.by_name["seed"] = app->add_option("--seed", f.seed, "Random seed");
  o.by_name["lr"] = app->add_option("--lr", f.lr, "Base learning rate");
  o.by_name["objective"] =
      app->add_option("--objective", f.objective,
                      "eq1: hard negatives in the denominator; eq2: in-batch only")
          ->check(CLI::IsMember({"eq1", "eq2"}));
  o.by_name["prompt"] =
      app->add_option("--prompt", f.prompt, "Evaluation prompt template")
          ->check(CLI::IsMember({"none", "prompt1", "prompt2", "prompt3"}));
  o.by_name["shards"] =
      app->add_option("--shards", f.shards, "Simulated data-parallel shards");
  o.by_name["out"] = app->add_option("--out", f.out, "Output directory");
}

void add_training_shape(CLI::App* app, Flags& f, Options& o) {
  o.by_name["batch_size"] =
      app->add_option("--batch-size", f.batch_size, "Global batch size");
  o.by_name["epochs"] = app->add_option("--epochs", f.epochs, "Training epochs");
  o.by_name["warmup"] =
      app->add_option("--warmup", f.warmup, "Linear warmup steps");
}

RunConfig resolve(const Flags& f, const Options& o) {
  RunConfig c;
  if (o.given("config")) c = load_run_config(f.config);
  if (o.given("seed")) c.train.seed = f.seed;
  if (o.given("lr")) c.train.learning_rate = f.lr;
  if (o.given("objective")) c.train.objective = parse_objective(f.objective);
  if (o.given("prompt")) c.prompt = f.prompt;
  if (o.given("shards")) c.train.num_shards = f.shards;
  if (o.given("out")) c.out_dir = f.out;
  if (o.given("batch_size")) c.train.batch_size = f.batch_size;
  if (o.given("epochs")) c.train.max_epochs = f.epochs;
  if (o.given("warmup")) c.train.warmup_steps = f.warmup;
  if (o.given("triplets")) c.triplets = f.triplets;
  if (o.given("sts")) c.sts = f.sts;
  if (o.given("checkpoint")) c.checkpoint = f.checkpoint;
  if (o.given("checkpoint_dir")) c.checkpoint_dir = f.checkpoint_dir;
  if (o.given("input")) c.input = f.input;
  if (o.given("scores")) c.scores = f.scores;
  validate(c);
  return c;
}

void require(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(fmt::format("missing {}", what));
}

fs::path prepare_out_dir(const RunConfig& c) {
  const fs::path dir = c.out_dir;
  fs::create_directories(dir);
  std::ofstream out(dir / "resolved_config.json", std::ios::trunc);
  if (!out) {
    throw std::runtime_error(fmt::format("cannot write to {}", dir.string()));
  }
  out << to_json(c).dump(2) << '\n';
  return dir;
}

LoraModel load_model(const RunConfig& c) {
  if (c.checkpoint.empty()) {
    TrainState state = init_training(c.model, c.train);
    state.model.set_training(false);
    return std::move(state.model);
  }
  return model_from_checkpoint(load_checkpoint(c.checkpoint));
}

std::vector<NamedStsSet> load_sts_sets(const RunConfig& c) {
  if (c.sts.empty()) throw ConfigError("missing --sts or data.sts");
  std::vector<NamedStsSet> sets;
  for (const std::string& path : c.sts) {
    sets.push_back({fs::path(path).stem().string(), load_sts(path)});
  }
  return sets;
}

int cmd_train(const RunConfig& c, std::ostream& out, std::ostream& err,
              const std::optional<std::string>& resume) {
  require(c.triplets, "--triplets or data.triplets");
  const std::vector<TripletRecord> records = load_triplets(c.triplets);
  const fs::path dir = prepare_out_dir(c);
  TrainingOptions options;
  if (resume) options.resume_from = *resume;
  const int level = verbosity();
  if (level >= 2) {
    options.on_step = [&err](const StepLog& s) {
      fmt::print(err, "step {} loss {:.6f} lr {:.3e}\n", s.step, s.loss, s.lr);
    };
  }
  if (level >= 1) {
    fmt::print(err, "training on {} triplets, {} steps\n", records.size(),
               total_steps(c.train, records.size()));
  }
  const TrainingSummary summary =
      run_training(c.model, c.train, records, dir, options);
  fmt::print(out, "steps {}\nfinal_checkpoint {}\nloss_log {}\n",
             summary.total_steps, summary.final_checkpoint.string(),
             summary.loss_log.string());
  return kExitOk;
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  const std::vector<NamedStsSet> sets = load_sts_sets(c);
  const LoraModel model = load_model(c);
  const ModelEmbedder embedder(model);
  const PromptTemplate prompt = PromptTemplate::named(c.prompt);
  std::vector<EvalReport> reports;
  for (const NamedStsSet& set : sets) {
    reports.push_back(evaluate_sts(embedder, set.records, prompt, set.name));
  }
  const AggregateReport report = make_aggregate_report(std::move(reports));
  const fs::path dir = prepare_out_dir(c);
  write_report_csv(dir / "report.csv", report);
  write_aggregate_json(dir / "aggregate.json", report);
  for (const EvalReport& r : report.reports) {
    fmt::print(out, "{}\t{:.2f}\t{}\n", r.benchmark, r.spearman_pct, r.n_pairs);
  }
  fmt::print(out, "overall\t{}\n", report.overall.display());
  return kExitOk;
}

int cmd_embed(const RunConfig& c, std::ostream& out) {
  require(c.input, "--input or data.input");
  std::ifstream in(c.input);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", c.input));
  const PromptTemplate prompt = PromptTemplate::named(c.prompt);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(prompt.apply(line));
  }
  const LoraModel model = load_model(c);
  const auto vectors = ModelEmbedder(model).embed(lines);
  const fs::path dir = prepare_out_dir(c);
  const fs::path path = dir / "embeddings.jsonl";
  std::ofstream file(path, std::ios::trunc);
  for (const auto& v : vectors) file << nlohmann::json(v).dump() << '\n';
  if (!file.flush()) {
    throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  }
  fmt::print(out, "embedded {} lines into {}\n", vectors.size(), path.string());
  return kExitOk;
}

int cmd_curve(const RunConfig& c, std::ostream& out) {
  const std::vector<NamedStsSet> sets = load_sts_sets(c);
  const fs::path source = c.checkpoint_dir.empty() ? fs::path(c.out_dir)
                                                   : fs::path(c.checkpoint_dir);
  const CurveResult curve = checkpoint_curve(
      source, sets, PromptTemplate::named(c.prompt), c.convergence_tolerance);
  const fs::path dir = prepare_out_dir(c);
  write_curve_csv(dir / "curve.csv", curve);
  for (const CurveRow& r : curve.rows) {
    if (r.overall) {
      fmt::print(out, "{}\t{:.2f}\n", r.step, *r.overall);
    } else {
      fmt::print(out, "{}\tfailed\t{}\n", r.step, r.error);
    }
  }
  if (curve.convergence_step) {
    fmt::print(out, "converged_at {}\n", *curve.convergence_step);
  }
  return kExitOk;
}

std::vector<double> read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", path));
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream tokens(text);
  std::vector<double> scores;
  for (std::string token; tokens >> token;) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw std::runtime_error(
          fmt::format("{}: '{}' is not a number", path, token));
    }
    scores.push_back(value);
  }
  if (scores.empty()) throw std::runtime_error(fmt::format("{}: no scores", path));
  return scores;
}

int cmd_aggregate(const RunConfig& c, std::ostream& out) {
  require(c.scores, "--scores or data.scores");
  const std::vector<double> scores = read_scores(c.scores);
  const Aggregate result = aggregate(scores);
  const fs::path dir = prepare_out_dir(c);
  nlohmann::ordered_json j;
  j["n"] = scores.size();
  j["mean"] = result.mean;
  j["std"] = result.std;
  j["display"] = result.display();
  std::ofstream(dir / "aggregate.json", std::ios::trunc) << j.dump(2) << '\n';
  fmt::print(out, "{}\n", result.display());
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err) {
  CLI::App app{"Contrastive LoRA fine-tuning of small decoder LMs for "
               "sentence embeddings",
               "embedlab"};
  app.failure_message(CLI::FailureMessage::help);
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  const RunConfig defaults;
  Flags f{};
  f.seed = defaults.train.seed;
  f.lr = defaults.train.learning_rate;
  f.objective = std::string(objective_name(defaults.train.objective));
  f.prompt = defaults.prompt;
  f.shards = defaults.train.num_shards;
  f.out = defaults.out_dir;
  f.batch_size = defaults.train.batch_size;
  f.epochs = defaults.train.max_epochs;
  f.warmup = defaults.train.warmup_steps;

  std::map<std::string, Options> options;
  CLI::App* train = app.add_subcommand("train", "Fine-tune LoRA adapters on NLI triplets");
  add_common(train, f, options["train"]);
  add_training_shape(train, f, options["train"]);
  options["train"].by_name["triplets"] =
      train->add_option("--triplets", f.triplets, "Triplet JSONL file");
  options["train"].by_name["resume"] =
      train->add_option("--resume", f.resume, "Checkpoint to resume from");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on STS files");
  add_common(eval, f, options["eval"]);
  options["eval"].by_name["sts"] =
      eval->add_option("--sts", f.sts, "STS files (JSONL or TSV), one benchmark each");
  options["eval"].by_name["checkpoint"] = eval->add_option(
      "--checkpoint", f.checkpoint, "Checkpoint file; omit for the initialized model");

  CLI::App* embed = app.add_subcommand("embed", "Embed each line of a text file");
  add_common(embed, f, options["embed"]);
  options["embed"].by_name["input"] =
      embed->add_option("--input", f.input, "Text file, one sentence per line");
  options["embed"].by_name["checkpoint"] = embed->add_option(
      "--checkpoint", f.checkpoint, "Checkpoint file; omit for the initialized model");

  CLI::App* curve = app.add_subcommand("curve", "Evaluate every checkpoint in a directory");
  add_common(curve, f, options["curve"]);
  options["curve"].by_name["sts"] =
      curve->add_option("--sts", f.sts, "STS files (JSONL or TSV), one benchmark each");
  options["curve"].by_name["checkpoint_dir"] = curve->add_option(
      "--checkpoints", f.checkpoint_dir, "Checkpoint directory; defaults to --out");

  CLI::App* agg = app.add_subcommand("aggregate", "Mean and population std of scores");
  add_common(agg, f, options["aggregate"]);
  options["aggregate"].by_name["scores"] =
      agg->add_option("--scores", f.scores, "File of whitespace/comma separated scores");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  RunConfig config;
  try {
    config = resolve(f, options.at(name));
  } catch (const ConfigError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitUsage;
  }

  try {
    if (name == "train") {
      std::optional<std::string> resume;
      if (options.at(name).given("resume")) resume = f.resume;
      return cmd_train(config, out, err, resume);
    }
    if (name == "eval") return cmd_eval(config, out);
    if (name == "embed") return cmd_embed(config, out);
    if (name == "curve") return cmd_curve(config, out);
    return cmd_aggregate(config, out);
  } catch (const ConfigError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitRuntime;
  }
}

}  // namespace embedlab::cli
