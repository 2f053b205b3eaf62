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

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "embedlab/model.h"
#include "embedlab/train_config.h"
#include "json.hpp"

namespace embedlab::cli {

// Malformed or inconsistent configuration; maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything one invocation needs. Defaults are the documented values.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  // data
  std::string triplets;
  std::vector<std::string> sts;
  std::string input;   // embed: one sentence per line
  std::string scores;  // aggregate: whitespace- or comma-separated numbers

  // eval
  std::string prompt = "none";
  std::string checkpoint;       // eval / embed; empty means the initialized model
  std::string checkpoint_dir;   // curve; empty means the output directory
  double convergence_tolerance = 0.5;

  // output
  std::string out_dir = "out";
};

// Overlays a JSON document onto `config`. Unknown keys and wrong types are
// rejected with the dotted key path.
void apply_json(RunConfig& config, const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

// Every field, defaults included, in a stable key order.
nlohmann::ordered_json to_json(const RunConfig& config);

// Validates model/train/lora fields and the prompt name.
void validate(const RunConfig& config);

}  // namespace embedlab::cli
