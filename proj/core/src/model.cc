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

#include "embedlab/model.h"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "embedlab/errors.h"
#include "embedlab/ops.h"

namespace embedlab {
namespace {

constexpr double kInitStd = 0.02;

Tensor gaussian(Shape shape, Rng& rng) {
  std::vector<double> values(num_elements(shape));
  for (double& v : values) v = kInitStd * rng.normal();
  return Tensor::from_values(std::move(shape), std::move(values));
}

Linear make_linear(std::size_t d_in, std::size_t d_out, Rng& rng) {
  return {gaussian({d_out, d_in}, rng), Tensor::zeros({d_out})};
}

LayerNormParams make_layer_norm(std::size_t d) {
  return {Tensor::full({d}, 1.0), Tensor::zeros({d})};
}

Linear clone(const Linear& l) { return {l.weight.clone(), l.bias.clone()}; }
LayerNormParams clone(const LayerNormParams& p) {
  return {p.gamma.clone(), p.beta.clone()};
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("model config: " + what);
  };
  if (vocab_size <= 0) fail("vocab_size must be positive");
  if (d_model <= 0) fail("d_model must be positive");
  if (n_layers <= 0) fail("n_layers must be positive");
  if (n_heads <= 0) fail("n_heads must be positive");
  if (d_ff <= 0) fail("d_ff must be positive");
  if (max_seq_len <= 0) fail("max_seq_len must be positive");
  if (d_model % n_heads != 0) fail("n_heads must divide d_model");
  if (pad_token_id == eos_token_id) fail("pad and eos ids must differ");
  if (pad_token_id < 0 || pad_token_id >= vocab_size) {
    fail("pad_token_id out of range");
  }
  if (eos_token_id < 0 || eos_token_id >= vocab_size) {
    fail("eos_token_id out of range");
  }
}

std::string_view projection_name(Projection p) {
  switch (p) {
    case Projection::kQuery:
      return "W_q";
    case Projection::kKey:
      return "W_k";
    case Projection::kValue:
      return "W_v";
    case Projection::kOutput:
      return "W_o";
  }
  return "?";
}

std::optional<Projection> parse_projection(std::string_view name) {
  for (Projection p : kAllProjections) {
    if (projection_name(p) == name) return p;
  }
  return std::nullopt;
}

TransformerLM::TransformerLM(const ModelConfig& config, Rng& init_rng)
    : config_(config) {
  config_.validate();
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto ff = static_cast<std::size_t>(config_.d_ff);
  token_embedding_ =
      gaussian({static_cast<std::size_t>(config_.vocab_size), d}, init_rng);
  position_embedding_ =
      gaussian({static_cast<std::size_t>(config_.max_seq_len), d}, init_rng);
  blocks_.reserve(config_.n_layers);
  for (int layer = 0; layer < config_.n_layers; ++layer) {
    DecoderBlock block;
    block.ln_attn = make_layer_norm(d);
    for (Projection p : kAllProjections) {
      block.attn[static_cast<int>(p)] = make_linear(d, d, init_rng);
    }
    block.ln_mlp = make_layer_norm(d);
    block.fc_in = make_linear(d, ff, init_rng);
    block.fc_out = make_linear(ff, d, init_rng);
    blocks_.push_back(std::move(block));
  }
  ln_final_ = make_layer_norm(d);
}

TransformerLM TransformerLM::clone() const {
  TransformerLM copy;
  copy.config_ = config_;
  copy.token_embedding_ = token_embedding_.clone();
  copy.position_embedding_ = position_embedding_.clone();
  for (const DecoderBlock& b : blocks_) {
    DecoderBlock c;
    c.ln_attn = embedlab::clone(b.ln_attn);
    for (std::size_t i = 0; i < b.attn.size(); ++i) {
      c.attn[i] = embedlab::clone(b.attn[i]);
    }
    c.ln_mlp = embedlab::clone(b.ln_mlp);
    c.fc_in = embedlab::clone(b.fc_in);
    c.fc_out = embedlab::clone(b.fc_out);
    copy.blocks_.push_back(std::move(c));
  }
  copy.ln_final_ = embedlab::clone(ln_final_);
  return copy;
}

std::vector<NamedTensor> TransformerLM::named_parameters() const {
  std::vector<NamedTensor> out;
  out.push_back({"token_embedding", token_embedding_});
  out.push_back({"position_embedding", position_embedding_});
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const DecoderBlock& b = blocks_[i];
    const std::string prefix = fmt::format("layers.{}.", i);
    out.push_back({prefix + "ln_attn.gamma", b.ln_attn.gamma});
    out.push_back({prefix + "ln_attn.beta", b.ln_attn.beta});
    for (Projection p : kAllProjections) {
      const std::string name = prefix + "attn." + std::string(projection_name(p));
      out.push_back({name + ".weight", b.attn[static_cast<int>(p)].weight});
      out.push_back({name + ".bias", b.attn[static_cast<int>(p)].bias});
    }
    out.push_back({prefix + "ln_mlp.gamma", b.ln_mlp.gamma});
    out.push_back({prefix + "ln_mlp.beta", b.ln_mlp.beta});
    out.push_back({prefix + "mlp.fc_in.weight", b.fc_in.weight});
    out.push_back({prefix + "mlp.fc_in.bias", b.fc_in.bias});
    out.push_back({prefix + "mlp.fc_out.weight", b.fc_out.weight});
    out.push_back({prefix + "mlp.fc_out.bias", b.fc_out.bias});
  }
  out.push_back({"ln_final.gamma", ln_final_.gamma});
  out.push_back({"ln_final.beta", ln_final_.beta});
  return out;
}

void TransformerLM::set_requires_grad(bool requires_grad) {
  for (NamedTensor& p : named_parameters()) {
    p.tensor.set_requires_grad(requires_grad);
  }
}

void TransformerLM::validate_batch(const TokenBatch& batch) const {
  const std::size_t n = batch.batch * batch.length;
  if (batch.batch == 0 || batch.length == 0) {
    throw ShapeError("forward: empty token batch");
  }
  if (batch.tokens.size() != n || batch.is_pad.size() != n ||
      batch.eos_positions.size() != batch.batch) {
    throw ShapeError(fmt::format(
        "forward: inconsistent token batch [{}x{}] with {} tokens, {} pad "
        "flags, {} eos positions",
        batch.batch, batch.length, batch.tokens.size(), batch.is_pad.size(),
        batch.eos_positions.size()));
  }
  if (batch.length > static_cast<std::size_t>(config_.max_seq_len)) {
    throw std::out_of_range(fmt::format(
        "forward: sequence length {} exceeds max_seq_len {}", batch.length,
        config_.max_seq_len));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (batch.tokens[i] < 0 || batch.tokens[i] >= config_.vocab_size) {
      throw std::out_of_range(fmt::format(
          "forward: token id {} at row {} position {} outside vocabulary of {}",
          batch.tokens[i], i / batch.length, i % batch.length,
          config_.vocab_size));
    }
  }
  for (std::size_t b = 0; b < batch.batch; ++b) {
    if (batch.is_pad[b * batch.length]) {
      throw ShapeError(fmt::format("forward: row {} is entirely padding", b));
    }
  }
}

Tensor TransformerLM::project(Tape& tape, const Tensor& x, std::size_t layer,
                              Projection projection,
                              const ProjectionAdapter* adapter) const {
  const Linear& lin = blocks_[layer].attn[static_cast<int>(projection)];
  Tensor y = ops::add(tape, ops::matmul(tape, x, lin.weight, true), lin.bias);
  if (adapter != nullptr) {
    Tensor delta = adapter->delta(tape, layer, projection, x);
    if (delta.defined()) y = ops::add(tape, y, delta);
  }
  return y;
}

Tensor TransformerLM::forward(Tape& tape, const TokenBatch& batch,
                              const ProjectionAdapter* adapter) const {
  validate_batch(batch);
  const std::size_t B = batch.batch;
  const std::size_t L = batch.length;
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto H = static_cast<std::size_t>(config_.n_heads);
  const std::size_t dh = d / H;

  std::vector<int> positions(B * L);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    positions[i] = static_cast<int>(i % L);
  }
  Tensor x = ops::add(tape, ops::embedding(tape, token_embedding_, batch.tokens),
                      ops::embedding(tape, position_embedding_, positions));

  // keep[b,h,i,j]: query i may attend key j.
  std::vector<std::uint8_t> keep(B * H * L * L);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < L; ++j) {
          keep[((b * H + h) * L + i) * L + j] =
              j <= i && !batch.is_pad[b * L + j];
        }
      }
    }
  }

  const double score_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  auto split_heads = [&](const Tensor& t) {
    Tensor r = ops::reshape(tape, t, {B, L, H, dh});
    return ops::reshape(tape, ops::permute_0213(tape, r), {B * H, L, dh});
  };

  for (std::size_t layer = 0; layer < blocks_.size(); ++layer) {
    const DecoderBlock& blk = blocks_[layer];
    Tensor h = ops::layer_norm(tape, x, blk.ln_attn.gamma, blk.ln_attn.beta);
    Tensor q = split_heads(project(tape, h, layer, Projection::kQuery, adapter));
    Tensor k = split_heads(project(tape, h, layer, Projection::kKey, adapter));
    Tensor v = split_heads(project(tape, h, layer, Projection::kValue, adapter));
    Tensor scores =
        ops::scale(tape, ops::batched_matmul(tape, q, k, true), score_scale);
    Tensor probs = ops::softmax_rows(tape, scores, keep);
    Tensor ctx = ops::batched_matmul(tape, probs, v);
    ctx = ops::reshape(tape, ctx, {B, H, L, dh});
    ctx = ops::reshape(tape, ops::permute_0213(tape, ctx), {B * L, d});
    x = ops::add(tape, x, project(tape, ctx, layer, Projection::kOutput, adapter));

    Tensor m = ops::layer_norm(tape, x, blk.ln_mlp.gamma, blk.ln_mlp.beta);
    m = ops::add(tape, ops::matmul(tape, m, blk.fc_in.weight, true),
                 blk.fc_in.bias);
    m = ops::gelu(tape, m);
    m = ops::add(tape, ops::matmul(tape, m, blk.fc_out.weight, true),
                 blk.fc_out.bias);
    x = ops::add(tape, x, m);
  }
  x = ops::layer_norm(tape, x, ln_final_.gamma, ln_final_.beta);
  return ops::reshape(tape, x, {B, L, d});
}

Tensor TransformerLM::extract_embedding(Tape& tape, const Tensor& hidden,
                                        const TokenBatch& batch) const {
  const auto d = static_cast<std::size_t>(config_.d_model);
  if (hidden.shape() != Shape{batch.batch, batch.length, d}) {
    throw ShapeError(fmt::format(
        "extract_embedding: hidden shape {} does not match batch [{}x{}]",
        shape_string(hidden.shape()), batch.batch, batch.length));
  }
  std::vector<std::size_t> rows(batch.batch);
  for (std::size_t b = 0; b < batch.batch; ++b) {
    const std::size_t pos = batch.eos_positions[b];
    if (pos >= batch.length ||
        batch.tokens[b * batch.length + pos] != config_.eos_token_id) {
      throw std::invalid_argument(fmt::format(
          "extract_embedding: row {} position {} does not hold the EOS token",
          b, pos));
    }
    rows[b] = b * batch.length + pos;
  }
  Tensor flat = ops::reshape(tape, hidden, {batch.batch * batch.length, d});
  return ops::gather_rows(tape, flat, rows);
}

Tensor TransformerLM::embed(Tape& tape, const TokenBatch& batch,
                            const ProjectionAdapter* adapter) const {
  return extract_embedding(tape, forward(tape, batch, adapter), batch);
}

}  // namespace embedlab
