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

#include "embedlab/objective.h"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "embedlab/errors.h"
#include "embedlab/ops.h"

namespace embedlab {
namespace {

void validate(const ContrastiveBatch& batch, bool need_negatives) {
  if (!(batch.temperature > 0.0)) {
    throw std::invalid_argument(
        fmt::format("infonce: temperature must be > 0, got {}",
                    batch.temperature));
  }
  if (!batch.anchors.defined() || !batch.positives.defined()) {
    throw std::invalid_argument("infonce: anchors and positives are required");
  }
  if (need_negatives && !batch.negatives.defined()) {
    throw std::invalid_argument(
        "infonce: hard negatives are required; use the in-batch-only "
        "objective when they are absent");
  }
  const Shape& s = batch.anchors.shape();
  if (s.size() != 2) {
    throw ShapeError("infonce: anchors must be [N, d], got " + shape_string(s));
  }
  if (batch.positives.shape() != s) {
    throw ShapeError(fmt::format("infonce: positives {} vs anchors {}",
                                 shape_string(batch.positives.shape()),
                                 shape_string(s)));
  }
  if (need_negatives && batch.negatives.shape() != s) {
    throw ShapeError(fmt::format("infonce: negatives {} vs anchors {}",
                                 shape_string(batch.negatives.shape()),
                                 shape_string(s)));
  }
}

// Mean over rows of logsumexp(logits_i) - logits_i[i].
Tensor mean_nll(Tape& tape, const Tensor& logits, std::size_t n) {
  std::vector<std::size_t> diag(n);
  std::iota(diag.begin(), diag.end(), 0);
  return ops::mean(tape, ops::cross_entropy_rows(tape, logits, diag));
}

}  // namespace

std::string_view objective_name(Objective objective) {
  return objective == Objective::kWithHardNegatives ? "eq1" : "eq2";
}

Objective parse_objective(std::string_view name) {
  if (name == "eq1") return Objective::kWithHardNegatives;
  if (name == "eq2") return Objective::kInBatchOnly;
  throw std::invalid_argument(
      fmt::format("unknown objective '{}' (expected eq1 or eq2)", name));
}

double cosine_sim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ShapeError(fmt::format("cosine_sim: dimension mismatch {} vs {}",
                                 u.size(), v.size()));
  }
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) {
    throw ZeroNormError("cosine_sim: zero-norm vector");
  }
  return dot / (std::sqrt(uu) * std::sqrt(vv));
}

Tensor infonce_loss(Tape& tape, const ContrastiveBatch& batch) {
  validate(batch, true);
  const std::size_t n = batch.anchors.dim(0);
  const double inv_t = 1.0 / batch.temperature;
  Tensor h = ops::normalize_rows(tape, batch.anchors);
  Tensor pos = ops::normalize_rows(tape, batch.positives);
  Tensor neg = ops::normalize_rows(tape, batch.negatives);
  // [N, 2N]: columns 0..N-1 are positives, N..2N-1 hard negatives.
  const Tensor parts[] = {
      ops::scale(tape, ops::matmul(tape, h, pos, true), inv_t),
      ops::scale(tape, ops::matmul(tape, h, neg, true), inv_t)};
  return mean_nll(tape, ops::concat(tape, parts, 1), n);
}

Tensor infonce_loss_no_hard_neg(Tape& tape, const ContrastiveBatch& batch) {
  validate(batch, false);
  const std::size_t n = batch.anchors.dim(0);
  Tensor h = ops::normalize_rows(tape, batch.anchors);
  Tensor pos = ops::normalize_rows(tape, batch.positives);
  Tensor logits = ops::scale(tape, ops::matmul(tape, h, pos, true),
                             1.0 / batch.temperature);
  return mean_nll(tape, logits, n);
}

Tensor contrastive_loss(Tape& tape, const ContrastiveBatch& batch,
                        Objective objective) {
  return objective == Objective::kWithHardNegatives
             ? infonce_loss(tape, batch)
             : infonce_loss_no_hard_neg(tape, batch);
}

}  // namespace embedlab
