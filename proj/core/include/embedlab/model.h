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
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "embedlab/rng.h"
#include "embedlab/tensor.h"

namespace embedlab {

struct ModelConfig {
  int vocab_size = 260;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int max_seq_len = 64;
  int pad_token_id = 256;
  int eos_token_id = 257;

  // Throws std::invalid_argument naming the first violated constraint.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class Projection { kQuery = 0, kKey = 1, kValue = 2, kOutput = 3 };

inline constexpr std::array<Projection, 4> kAllProjections = {
    Projection::kQuery, Projection::kKey, Projection::kValue,
    Projection::kOutput};

// "W_q", "W_k", "W_v", "W_o".
std::string_view projection_name(Projection p);
std::optional<Projection> parse_projection(std::string_view name);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Right-padded token matrix. is_pad and tokens are row-major [batch, length].
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<int> tokens;
  std::vector<std::uint8_t> is_pad;
  std::vector<std::size_t> eos_positions;
};

// Supplies an additive term for an attention projection. The LoRA module
// implements this; the base model has no knowledge of adapters otherwise.
class ProjectionAdapter {
 public:
  virtual ~ProjectionAdapter() = default;
  // Returns an undefined tensor when the projection is not adapted.
  virtual Tensor delta(Tape& tape, std::size_t layer, Projection projection,
                       const Tensor& input) const = 0;
};

struct Linear {
  Tensor weight;  // [d_out, d_in]
  Tensor bias;    // [d_out]
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;
};

struct DecoderBlock {
  LayerNormParams ln_attn;
  std::array<Linear, 4> attn;  // indexed by Projection
  LayerNormParams ln_mlp;
  Linear fc_in;
  Linear fc_out;
};

// Pre-norm decoder-only transformer with learned positions and GELU MLPs.
// A sentence embedding is the final-layer hidden state at the appended EOS.
class TransformerLM {
 public:
  // Weights ~ N(0, 0.02^2), biases 0, layer-norm gamma 1 / beta 0.
  TransformerLM(const ModelConfig& config, Rng& init_rng);

  TransformerLM(TransformerLM&&) = default;
  TransformerLM& operator=(TransformerLM&&) = default;
  TransformerLM(const TransformerLM&) = delete;
  TransformerLM& operator=(const TransformerLM&) = delete;

  // Deep copy; the result shares no storage with this model.
  TransformerLM clone() const;

  const ModelConfig& config() const { return config_; }

  // Hidden states [batch, length, d_model] after the final layer norm.
  // Position t attends to positions <= t that are not padding.
  Tensor forward(Tape& tape, const TokenBatch& batch,
                 const ProjectionAdapter* adapter = nullptr) const;

  // Row b is hidden[b, eos_positions[b], :]. Throws if that position does
  // not hold the EOS token.
  Tensor extract_embedding(Tape& tape, const Tensor& hidden,
                           const TokenBatch& batch) const;

  // forward + extract_embedding.
  Tensor embed(Tape& tape, const TokenBatch& batch,
               const ProjectionAdapter* adapter = nullptr) const;

  // Fixed order; names are stable across runs and used by checkpoints.
  std::vector<NamedTensor> named_parameters() const;
  void set_requires_grad(bool requires_grad);

  DecoderBlock& block(std::size_t layer) { return blocks_.at(layer); }
  const DecoderBlock& block(std::size_t layer) const { return blocks_.at(layer); }

 private:
  TransformerLM() = default;
  Tensor project(Tape& tape, const Tensor& x, std::size_t layer,
                 Projection projection,
                 const ProjectionAdapter* adapter) const;
  void validate_batch(const TokenBatch& batch) const;

  ModelConfig config_;
  Tensor token_embedding_;     // [vocab, d]
  Tensor position_embedding_;  // [max_seq_len, d]
  std::vector<DecoderBlock> blocks_;
  LayerNormParams ln_final_;
};

}  // namespace embedlab
