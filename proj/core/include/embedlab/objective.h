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

#include <span>
#include <string_view>

#include "embedlab/tensor.h"

namespace embedlab {

enum class Objective {
  kWithHardNegatives,  // "eq1": in-batch positives + hard negatives
  kInBatchOnly,        // "eq2": in-batch positives only
};

std::string_view objective_name(Objective objective);
Objective parse_objective(std::string_view name);

// Embedding blocks of one contrastive batch. Row i of `anchors` is a premise,
// row i of `positives` its entailment, row i of `negatives` its
// contradiction. All blocks are [N, d].
struct ContrastiveBatch {
  Tensor anchors;
  Tensor positives;
  Tensor negatives;  // may be undefined for the in-batch-only objective
  double temperature = 0.05;
};

// u.v / (|u| |v|). Throws ZeroNormError on a zero vector.
double cosine_sim(std::span<const double> u, std::span<const double> v);

// Mean over anchors i of
//   -log( exp(s(i,i+)/t) / sum_j [exp(s(i,j+)/t) + exp(s(i,j-)/t)] )
// with s the cosine similarity, evaluated shift-by-max.
Tensor infonce_loss(Tape& tape, const ContrastiveBatch& batch);

// Same, with only the in-batch positives in the denominator. Zero for N = 1.
Tensor infonce_loss_no_hard_neg(Tape& tape, const ContrastiveBatch& batch);

Tensor contrastive_loss(Tape& tape, const ContrastiveBatch& batch,
                        Objective objective);

}  // namespace embedlab
