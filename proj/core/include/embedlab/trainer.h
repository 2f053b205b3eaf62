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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "embedlab/checkpoint.h"
#include "embedlab/dataset.h"
#include "embedlab/lora.h"
#include "embedlab/optimizer.h"
#include "embedlab/rng.h"
#include "embedlab/schedule.h"
#include "embedlab/tokenizer.h"
#include "embedlab/train_config.h"

namespace embedlab {

// Mutable state of one training run.
struct TrainState {
  LoraModel model;
  AdamW optimizer;
  Rng dropout_rng;
  std::int64_t step = 0;  // optimizer updates completed
};

// Base weights and adapter A matrices are drawn from Rng(config.seed); the
// dropout stream is seeded independently from the same seed. The model is
// left in training mode.
TrainState init_training(const ModelConfig& model_config,
                         const TrainConfig& config);

LrSchedule make_schedule(const TrainConfig& config, std::int64_t total_steps);

// Loss of one batch with gradients accumulated into the adapter parameters.
// Premises, entailments and contradictions are embedded in that order, all
// drawing adapter dropout from state.dropout_rng. Contradictions are skipped
// by the in-batch-only objective.
double accumulate_batch_gradient(TrainState& state,
                                 std::span<const TripletRecord> batch,
                                 const ByteTokenizer& tokenizer,
                                 const TrainConfig& config);

struct StepResult {
  double loss = 0.0;
  double lr = 0.0;
};

// One optimizer update on one batch at lr_at(state.step). Throws
// NonFiniteLoss before touching any parameter if the loss is not finite.
StepResult train_step(TrainState& state, std::span<const TripletRecord> batch,
                      const ByteTokenizer& tokenizer, const TrainConfig& config,
                      const LrSchedule& schedule);

struct ShardedStepResult {
  std::vector<double> shard_losses;
  // Mean of shard gradients, one vector per trainable tensor.
  std::vector<std::vector<double>> averaged_gradient;
  double lr = 0.0;
};

// Splits the batch into `num_shards` contiguous shards, each with
// shard-local in-batch negatives, averages their gradients in shard order
// and applies one update. Throws std::invalid_argument unless num_shards
// divides the batch.
ShardedStepResult sharded_step(TrainState& state,
                               std::span<const TripletRecord> batch,
                               std::size_t num_shards,
                               const ByteTokenizer& tokenizer,
                               const TrainConfig& config,
                               const LrSchedule& schedule);

// Snapshot of the full state.
Checkpoint capture_checkpoint(const TrainState& state,
                              const TrainConfig& config,
                              std::int64_t total_steps);

// Copies checkpoint contents into `state`. Every config field and tensor
// shape is checked first; on any mismatch nothing is modified and a
// CheckpointError lists each differing field and tensor.
void apply_checkpoint(TrainState& state, const TrainConfig& config,
                      const Checkpoint& checkpoint);

// Model with the checkpoint's weights, in evaluation mode.
LoraModel model_from_checkpoint(const Checkpoint& checkpoint);

struct StepLog {
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainingOptions {
  // Continue from this checkpoint instead of initializing.
  std::optional<std::filesystem::path> resume_from;
  // Called after every optimizer update.
  std::function<void(const StepLog&)> on_step;
};

struct TrainingSummary {
  std::int64_t total_steps = 0;
  std::filesystem::path final_checkpoint;
  std::filesystem::path loss_log;
  std::vector<StepLog> steps;  // updates performed by this call
};

// Trains for max_epochs over `records`, reshuffling each epoch with a seed
// derived from (config.seed, epoch). Writes checkpoint-<step>.ckpt at step 0,
// every checkpoint_interval updates and at the end, and loss_log.csv with
// columns step,loss,lr. The output directory is verified writable before any
// work starts.
TrainingSummary run_training(const ModelConfig& model_config,
                             const TrainConfig& config,
                             std::span<const TripletRecord> records,
                             const std::filesystem::path& out_dir,
                             const TrainingOptions& options = {});

}  // namespace embedlab
