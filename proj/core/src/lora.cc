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

#include "embedlab/lora.h"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

#include "embedlab/ops.h"

namespace embedlab {

class LoraModel::Binding : public ProjectionAdapter {
 public:
  Binding(const LoraModel& model, Rng* dropout_rng)
      : model_(model), dropout_rng_(dropout_rng) {}

  Tensor delta(Tape& tape, std::size_t layer, Projection projection,
               const Tensor& input) const override {
    return model_.delta(tape, layer, projection, input, dropout_rng_);
  }

 private:
  const LoraModel& model_;
  Rng* dropout_rng_;
};

void LoraConfig::validate() const {
  if (rank < 1) throw std::invalid_argument("lora: rank must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("lora: alpha must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("lora: dropout must lie in [0, 1)");
  }
  if (targets.empty()) throw std::invalid_argument("lora: no target matrices");
}

std::set<Projection> parse_lora_targets(const std::vector<std::string>& names) {
  std::set<Projection> out;
  for (const std::string& name : names) {
    auto p = parse_projection(name);
    if (!p) {
      throw std::invalid_argument(fmt::format(
          "lora: unknown target matrix '{}' (expected W_q, W_k, W_v or W_o)",
          name));
    }
    out.insert(*p);
  }
  return out;
}

LoraModel::LoraModel(TransformerLM base, const LoraConfig& config,
                     Rng& init_rng)
    : base_(std::move(base)), config_(config) {
  config_.validate();
  const ModelConfig& mc = base_.config();
  for (Projection p : config_.targets) {
    // Attention projections are square [d_model, d_model].
    if (config_.rank > mc.d_model) {
      throw std::invalid_argument(fmt::format(
          "lora: rank {} exceeds min(d_in, d_out) = {} of {}", config_.rank,
          mc.d_model, projection_name(p)));
    }
  }
  base_.set_requires_grad(false);
  const auto r = static_cast<std::size_t>(config_.rank);
  for (std::size_t layer = 0; layer < static_cast<std::size_t>(mc.n_layers);
       ++layer) {
    for (Projection p : config_.targets) {
      const Tensor& w = base_.block(layer).attn[static_cast<int>(p)].weight;
      const std::size_t d_out = w.dim(0), d_in = w.dim(1);
      std::vector<double> a(r * d_in);
      for (double& v : a) v = 0.02 * init_rng.normal();
      adapters_.push_back(
          {layer, p, Tensor::from_values({r, d_in}, std::move(a), true),
           Tensor::zeros({d_out, r}, true)});
    }
  }
  index_adapters();
}

LoraModel::LoraModel(TransformerLM base, const LoraConfig& config,
                     std::vector<LoraAdapter> adapters)
    : base_(std::move(base)), config_(config), adapters_(std::move(adapters)) {
  config_.validate();
  base_.set_requires_grad(false);
  for (LoraAdapter& ad : adapters_) {
    ad.a.set_requires_grad(true);
    ad.b.set_requires_grad(true);
  }
  index_adapters();
}

void LoraModel::index_adapters() {
  adapter_index_.assign(base_.config().n_layers, {-1, -1, -1, -1});
  for (std::size_t i = 0; i < adapters_.size(); ++i) {
    const LoraAdapter& ad = adapters_[i];
    if (ad.layer >= adapter_index_.size()) {
      throw std::invalid_argument(
          fmt::format("lora: adapter layer {} out of range", ad.layer));
    }
    adapter_index_[ad.layer][static_cast<int>(ad.projection)] =
        static_cast<int>(i);
  }
}

Tensor LoraModel::delta(Tape& tape, std::size_t layer, Projection projection,
                        const Tensor& input, Rng* dropout_rng) const {
  if (layer >= adapter_index_.size()) return {};
  const int idx = adapter_index_[layer][static_cast<int>(projection)];
  if (idx < 0) return {};
  const LoraAdapter& ad = adapters_[idx];
  Tensor x = input;
  if (training_ && config_.dropout > 0.0) {
    x = ops::dropout(tape, input, config_.dropout, *dropout_rng);
  }
  Tensor low = ops::matmul(tape, x, ad.a, true);
  Tensor up = ops::matmul(tape, low, ad.b, true);
  return ops::scale(tape, up, config_.scale());
}

Tensor LoraModel::forward(Tape& tape, const TokenBatch& batch,
                          Rng* dropout_rng) const {
  if (training_ && config_.dropout > 0.0 && dropout_rng == nullptr) {
    throw std::invalid_argument(
        "lora: training-mode forward with dropout needs a dropout stream");
  }
  Binding binding(*this, dropout_rng);
  return base_.forward(tape, batch, &binding);
}

Tensor LoraModel::embed(Tape& tape, const TokenBatch& batch,
                        Rng* dropout_rng) const {
  return base_.extract_embedding(tape, forward(tape, batch, dropout_rng),
                                 batch);
}

std::vector<Tensor> LoraModel::trainable_parameters() const {
  std::vector<Tensor> out;
  for (const LoraAdapter& ad : adapters_) {
    out.push_back(ad.a);
    out.push_back(ad.b);
  }
  return out;
}

std::vector<NamedTensor> LoraModel::named_adapter_parameters() const {
  std::vector<NamedTensor> out;
  for (const LoraAdapter& ad : adapters_) {
    const std::string prefix = fmt::format("layers.{}.attn.{}.", ad.layer,
                                           projection_name(ad.projection));
    out.push_back({prefix + "lora_A", ad.a});
    out.push_back({prefix + "lora_B", ad.b});
  }
  return out;
}

std::size_t LoraModel::trainable_parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& t : trainable_parameters()) n += t.size();
  return n;
}

TransformerLM LoraModel::merge() {
  if (adapters_.empty()) {
    throw std::logic_error("lora: merge with no adapters attached");
  }
  if (training_ && config_.dropout > 0.0) {
    throw std::logic_error(
        "lora: merge requires inference mode (dropout is active)");
  }
  const double s = config_.scale();
  for (LoraAdapter& ad : adapters_) {
    Tensor& w = base_.block(ad.layer).attn[static_cast<int>(ad.projection)].weight;
    const std::size_t d_out = w.dim(0), d_in = w.dim(1);
    const auto r = static_cast<std::size_t>(config_.rank);
    auto wv = w.mutable_values();
    auto av = ad.a.values();
    auto bv = ad.b.values();
    for (std::size_t o = 0; o < d_out; ++o) {
      for (std::size_t i = 0; i < d_in; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < r; ++k) acc += bv[o * r + k] * av[k * d_in + i];
        wv[o * d_in + i] += s * acc;
      }
    }
  }
  adapters_.clear();
  index_adapters();
  return base_.clone();
}

LoraModel attach(TransformerLM model, const LoraConfig& config, Rng& init_rng) {
  return LoraModel(std::move(model), config, init_rng);
}

}  // namespace embedlab
