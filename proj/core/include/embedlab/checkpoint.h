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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "embedlab/model.h"
#include "embedlab/train_config.h"

namespace embedlab {

// Everything needed to resume training or rebuild the model for evaluation.
//
// Tensors are stored in a fixed order: base weights, adapter weights, then
// optimizer moments named "adam.m/<adapter tensor>" and "adam.v/<...>".
struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  std::int64_t step = 0;            // optimizer updates completed
  std::int64_t total_steps = 0;
  std::string dropout_rng_state;
  std::vector<NamedTensor> tensors;

  // Null when absent.
  const Tensor* find(std::string_view name) const;
};

// File layout:
//   EMBEDLAB-CKPT/1\n
//   manifest_bytes=<n>\n
//   <n bytes of key=value lines>
//   <payload: little-endian float64 values of every tensor, in order>
// The manifest records tensor names, shapes and offsets, the payload size
// and an FNV-1a 64 checksum of the payload.
inline constexpr std::string_view kCheckpointMagic = "EMBEDLAB-CKPT/1";

// (key, value) for every config field, in manifest order. Values are
// formatted so that parsing them back is exact.
std::vector<std::pair<std::string, std::string>> config_fields(
    const ModelConfig& model, const TrainConfig& train);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
// Throws CheckpointError on bad magic, truncation, a checksum mismatch or a
// malformed manifest.
Checkpoint parse_checkpoint(std::string_view bytes);

// Writes to a temporary sibling and renames into place.
void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// "checkpoint-000020.ckpt"
std::string checkpoint_filename(std::int64_t step);

struct CheckpointEntry {
  std::int64_t step;
  std::filesystem::path path;
};
// Files in `dir` named like checkpoint_filename(), in ascending step order.
std::vector<CheckpointEntry> list_checkpoints(const std::filesystem::path& dir);

}  // namespace embedlab
