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
#include <span>

#include "embedlab/rng.h"
#include "embedlab/tensor.h"

// Differentiable kernels. Each kernel validates shapes, computes its output
// eagerly and, when any input requires gradients, records its backward rule
// on the tape. Shape violations throw ShapeError naming the kernel and the
// offending shapes.
namespace embedlab::ops {

// [M,K] x [K,N] -> [M,N]; with transpose_b, b is [N,K].
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b,
              bool transpose_b = false);

// [G,M,K] x [G,K,N] -> [G,M,N]; with transpose_b, b is [G,N,K].
Tensor batched_matmul(Tape& tape, const Tensor& a, const Tensor& b,
                      bool transpose_b = false);

Tensor transpose(Tape& tape, const Tensor& a);

// b must match a's shape or a's trailing dimensions (broadcast over the
// leading ones, as for a bias row).
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
// Elementwise; shapes must match.
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);

// Softmax over the last axis. `keep`, when non-empty, has one entry per
// element; zero entries are excluded and receive probability 0.
Tensor softmax_rows(Tape& tape, const Tensor& a,
                    std::span<const std::uint8_t> keep = {});

// log(sum(exp(row))) over the last axis, shifted by the row maximum.
// Output drops the last axis ({1} for a vector input).
Tensor logsumexp_rows(Tape& tape, const Tensor& a);

// Normalizes over the last axis, then applies gamma/beta of that width.
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma,
                  const Tensor& beta, double eps = 1e-5);

// Exact (erf) GELU.
Tensor gelu(Tape& tape, const Tensor& x);

// Rows of `table` ([V,D]) selected by ids -> [ids.size(), D].
Tensor embedding(Tape& tape, const Tensor& table, std::span<const int> ids);

Tensor concat(Tape& tape, std::span<const Tensor> parts, std::size_t axis);

// Inverted dropout. One uniform draw per element from `rng`; p == 0 is the
// identity and draws nothing.
Tensor dropout(Tape& tape, const Tensor& x, double p, Rng& rng);

Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

// [A,B,C,D] -> [A,C,B,D].
Tensor permute_0213(Tape& tape, const Tensor& x);

// Rows of a 2-D tensor -> [rows.size(), D].
Tensor gather_rows(Tape& tape, const Tensor& x,
                   std::span<const std::size_t> rows);

// out[i] = x[i, cols[i]] for a 2-D tensor.
Tensor pick_per_row(Tape& tape, const Tensor& x,
                    std::span<const std::size_t> cols);

// Per-row negative log-likelihood of column targets[i] under softmax of a
// 2-D tensor of logits: log(sum_j exp(x_ij - m_i)) + (m_i - x_i,t), with m_i
// the row maximum. Output [rows].
Tensor cross_entropy_rows(Tape& tape, const Tensor& logits,
                          std::span<const std::size_t> targets);

Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);

// Scales every row of a 2-D tensor to unit L2 norm. Throws ZeroNormError on a
// zero row.
Tensor normalize_rows(Tape& tape, const Tensor& x);

}  // namespace embedlab::ops
