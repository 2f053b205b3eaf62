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

#include <cstddef>
#include <cstdint>

#include "embedlab/lora.h"
#include "embedlab/objective.h"

namespace embedlab {

struct TrainConfig {
  double learning_rate = 5e-5;
  int batch_size = 60;
  int warmup_steps = 100;
  int max_epochs = 1;
  double temperature = 0.05;
  LoraConfig lora;
  Objective objective = Objective::kWithHardNegatives;
  std::uint64_t seed = 42;
  int num_shards = 1;
  double eta_min = 0.0;
  int checkpoint_interval = 20;

  // Throws std::invalid_argument naming the first violated constraint.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Optimizer updates in one epoch: ceil(n_records / batch_size).
std::int64_t steps_per_epoch(const TrainConfig& config, std::size_t n_records);
std::int64_t total_steps(const TrainConfig& config, std::size_t n_records);

}  // namespace embedlab
