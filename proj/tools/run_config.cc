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

#include "run_config.h"

#include <fstream>
#include <functional>
#include <map>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "embedlab/lora.h"
#include "embedlab/objective.h"
#include "embedlab/tokenizer.h"

namespace embedlab::cli {
namespace {

using json = nlohmann::json;
using Setter = std::function<void(const json&)>;

// Fixed values listed in the canonical config for documentation only.
constexpr const char* kLossName = "InfoNCE";
constexpr const char* kSchedulerName = "CosineAnnealingLR";

template <typename T>
T get_as(const json& value, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!value.is_number()) throw ConfigError("expected a number");
    } else if constexpr (std::is_integral_v<T>) {
      if (!value.is_number_integer()) throw ConfigError("expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (value.is_number_integer() && value.get<long long>() < 0 &&
            !value.is_number_unsigned()) {
          throw ConfigError("expected a non-negative integer");
        }
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!value.is_string()) throw ConfigError("expected a string");
    }
    return value.get<T>();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("config: {}: {}", key, e.what()));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config: {}: {}", key, e.what()));
  }
}

std::vector<std::string> string_list(const json& value, const std::string& key) {
  if (!value.is_array()) {
    throw ConfigError(fmt::format("config: {}: expected a list of strings", key));
  }
  std::vector<std::string> out;
  for (const json& item : value) out.push_back(get_as<std::string>(item, key));
  return out;
}

void apply_section(const json& doc, const std::string& section,
                   const std::map<std::string, Setter>& setters) {
  if (!doc.is_object()) {
    throw ConfigError(fmt::format("config: {}: expected an object", section));
  }
  for (const auto& [key, value] : doc.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError(fmt::format("config: unknown key {}.{}", section, key));
    }
    it->second(value);
  }
}

template <typename T>
Setter setter_for(T& target, std::string key) {
  return [&target, key = std::move(key)](const json& v) {
    target = get_as<T>(v, key);
  };
}

Setter fixed(const char* expected, std::string key) {
  return [expected, key = std::move(key)](const json& v) {
    if (get_as<std::string>(v, key) != expected) {
      throw ConfigError(
          fmt::format("config: {}: only \"{}\" is supported", key, expected));
    }
  };
}

}  // namespace

void apply_json(RunConfig& c, const json& doc) {
  const std::map<std::string, Setter> model = {
      {"vocab_size", setter_for(c.model.vocab_size, "model.vocab_size")},
      {"d_model", setter_for(c.model.d_model, "model.d_model")},
      {"n_layers", setter_for(c.model.n_layers, "model.n_layers")},
      {"n_heads", setter_for(c.model.n_heads, "model.n_heads")},
      {"d_ff", setter_for(c.model.d_ff, "model.d_ff")},
      {"max_seq_len", setter_for(c.model.max_seq_len, "model.max_seq_len")},
      {"pad_token_id", setter_for(c.model.pad_token_id, "model.pad_token_id")},
      {"eos_token_id", setter_for(c.model.eos_token_id, "model.eos_token_id")},
  };
  const std::map<std::string, Setter> train = {
      {"loss", fixed(kLossName, "train.loss")},
      {"lr_scheduler", fixed(kSchedulerName, "train.lr_scheduler")},
      {"learning_rate", setter_for(c.train.learning_rate, "train.learning_rate")},
      {"batch_size", setter_for(c.train.batch_size, "train.batch_size")},
      {"warmup_steps", setter_for(c.train.warmup_steps, "train.warmup_steps")},
      {"max_epochs", setter_for(c.train.max_epochs, "train.max_epochs")},
      {"temperature", setter_for(c.train.temperature, "train.temperature")},
      {"objective",
       [&](const json& v) {
         try {
           c.train.objective =
               parse_objective(get_as<std::string>(v, "train.objective"));
         } catch (const std::invalid_argument& e) {
           throw ConfigError(fmt::format("config: train.objective: {}", e.what()));
         }
       }},
      {"seed", setter_for(c.train.seed, "train.seed")},
      {"num_shards", setter_for(c.train.num_shards, "train.num_shards")},
      {"eta_min", setter_for(c.train.eta_min, "train.eta_min")},
      {"checkpoint_interval",
       setter_for(c.train.checkpoint_interval, "train.checkpoint_interval")},
  };
  const std::map<std::string, Setter> lora = {
      {"rank", setter_for(c.train.lora.rank, "lora.rank")},
      {"alpha", setter_for(c.train.lora.alpha, "lora.alpha")},
      {"dropout", setter_for(c.train.lora.dropout, "lora.dropout")},
      {"targets",
       [&](const json& v) {
         try {
           c.train.lora.targets =
               parse_lora_targets(string_list(v, "lora.targets"));
         } catch (const std::invalid_argument& e) {
           throw ConfigError(fmt::format("config: lora.targets: {}", e.what()));
         }
       }},
  };
  const std::map<std::string, Setter> data = {
      {"triplets", setter_for(c.triplets, "data.triplets")},
      {"sts", [&](const json& v) { c.sts = string_list(v, "data.sts"); }},
      {"input", setter_for(c.input, "data.input")},
      {"scores", setter_for(c.scores, "data.scores")},
  };
  const std::map<std::string, Setter> eval = {
      {"prompt", setter_for(c.prompt, "eval.prompt")},
      {"checkpoint", setter_for(c.checkpoint, "eval.checkpoint")},
      {"checkpoint_dir", setter_for(c.checkpoint_dir, "eval.checkpoint_dir")},
      {"convergence_tolerance",
       setter_for(c.convergence_tolerance, "eval.convergence_tolerance")},
  };
  const std::map<std::string, Setter> output = {
      {"dir", setter_for(c.out_dir, "output.dir")},
  };
  const std::map<std::string, const std::map<std::string, Setter>*> sections = {
      {"model", &model}, {"train", &train}, {"lora", &lora},
      {"data", &data},   {"eval", &eval},   {"output", &output},
  };
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  for (const auto& [key, value] : doc.items()) {
    auto it = sections.find(key);
    if (it == sections.end()) {
      throw ConfigError(fmt::format("config: unknown key {}", key));
    }
    apply_section(value, key, *it->second);
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config {}", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  RunConfig config;
  apply_json(config, doc);
  return config;
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  std::vector<std::string> targets;
  for (Projection p : c.train.lora.targets) {
    targets.emplace_back(projection_name(p));
  }
  nlohmann::ordered_json j;
  j["model"] = {{"vocab_size", c.model.vocab_size},
                {"d_model", c.model.d_model},
                {"n_layers", c.model.n_layers},
                {"n_heads", c.model.n_heads},
                {"d_ff", c.model.d_ff},
                {"max_seq_len", c.model.max_seq_len},
                {"pad_token_id", c.model.pad_token_id},
                {"eos_token_id", c.model.eos_token_id}};
  j["train"] = {{"loss", kLossName},
                {"lr_scheduler", kSchedulerName},
                {"learning_rate", c.train.learning_rate},
                {"batch_size", c.train.batch_size},
                {"warmup_steps", c.train.warmup_steps},
                {"max_epochs", c.train.max_epochs},
                {"temperature", c.train.temperature},
                {"objective", std::string(objective_name(c.train.objective))},
                {"seed", c.train.seed},
                {"num_shards", c.train.num_shards},
                {"eta_min", c.train.eta_min},
                {"checkpoint_interval", c.train.checkpoint_interval}};
  j["lora"] = {{"rank", c.train.lora.rank},
               {"alpha", c.train.lora.alpha},
               {"dropout", c.train.lora.dropout},
               {"targets", targets}};
  j["data"] = {{"triplets", c.triplets},
               {"sts", c.sts},
               {"input", c.input},
               {"scores", c.scores}};
  j["eval"] = {{"prompt", c.prompt},
               {"checkpoint", c.checkpoint},
               {"checkpoint_dir", c.checkpoint_dir},
               {"convergence_tolerance", c.convergence_tolerance}};
  j["output"] = {{"dir", c.out_dir}};
  return j;
}

void validate(const RunConfig& c) {
  try {
    c.model.validate();
    c.train.validate();
    (void)PromptTemplate::named(c.prompt);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  }
  if (!(c.convergence_tolerance >= 0.0)) {
    throw ConfigError("config: eval.convergence_tolerance must be >= 0");
  }
}

}  // namespace embedlab::cli
