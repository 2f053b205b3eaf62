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

#include <array>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "embedlab/model.h"
#include "embedlab/rng.h"
#include "embedlab/tensor.h"

namespace embedlab {

struct LoraConfig {
  int rank = 8;
  double alpha = 32.0;
  double dropout = 0.1;
  std::set<Projection> targets = {Projection::kQuery, Projection::kKey,
                                  Projection::kValue, Projection::kOutput};

  double scale() const { return alpha / rank; }
  void validate() const;

  friend bool operator==(const LoraConfig&, const LoraConfig&) = default;
};

// Throws std::invalid_argument on a name outside {W_q, W_k, W_v, W_o}.
std::set<Projection> parse_lora_targets(const std::vector<std::string>& names);

// Rank-r update of one frozen [d_out, d_in] weight: W + scale * B * A.
struct LoraAdapter {
  std::size_t layer = 0;
  Projection projection = Projection::kQuery;
  Tensor a;  // [rank, d_in], Gaussian init
  Tensor b;  // [d_out, rank], zero init
};

// A frozen base model plus trainable low-rank adapters on attention
// projections. Dropout on the adapter input path is active only in training
// mode and draws from the stream handed to forward().
class LoraModel {
 public:
  LoraModel(TransformerLM base, const LoraConfig& config, Rng& init_rng);

  // Rebuilds a model from stored weights (checkpoint restore).
  LoraModel(TransformerLM base, const LoraConfig& config,
            std::vector<LoraAdapter> adapters);

  LoraModel(LoraModel&&) = default;
  LoraModel& operator=(LoraModel&&) = default;

  const TransformerLM& base() const { return base_; }
  const LoraConfig& config() const { return config_; }
  const std::vector<LoraAdapter>& adapters() const { return adapters_; }
  bool has_adapters() const { return !adapters_.empty(); }

  void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }

  // In training mode with dropout > 0, `dropout_rng` must be non-null.
  Tensor forward(Tape& tape, const TokenBatch& batch,
                 Rng* dropout_rng = nullptr) const;
  Tensor embed(Tape& tape, const TokenBatch& batch,
               Rng* dropout_rng = nullptr) const;

  // A then B for every adapter, ordered by (layer, projection).
  std::vector<Tensor> trainable_parameters() const;
  std::vector<NamedTensor> named_adapter_parameters() const;
  std::size_t trainable_parameter_count() const;

  // Folds every adapter into its base weight and returns a copy of the
  // result. Afterwards this model holds no adapters. Rejected in training
  // mode with nonzero dropout, and when no adapters remain.
  TransformerLM merge();

  // scale * dropout(input) A^T B^T, or an undefined tensor when the
  // projection has no adapter.
  Tensor delta(Tape& tape, std::size_t layer, Projection projection,
               const Tensor& input, Rng* dropout_rng) const;

 private:
  class Binding;
  void index_adapters();

  TransformerLM base_;
  LoraConfig config_;
  std::vector<LoraAdapter> adapters_;
  // adapter_index_[layer][projection] -> index into adapters_ or -1.
  std::vector<std::array<int, 4>> adapter_index_;
  bool training_ = false;
};

// Freezes the base weights and attaches zero-initialized adapters.
LoraModel attach(TransformerLM model, const LoraConfig& config, Rng& init_rng);

}  // namespace embedlab
