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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "embedlab/errors.h"
#include "embedlab/objective.h"
#include "gradcheck.h"
#include "oracles.h"

namespace embedlab {
namespace {

using testing::Matrix;

Matrix rows_of(const Tensor& t) {
  Matrix m(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    for (std::size_t j = 0; j < t.dim(1); ++j) m[i][j] = t.values()[i * t.dim(1) + j];
  }
  return m;
}

ContrastiveBatch random_batch(Rng& rng, std::size_t n, std::size_t d, double tau) {
  return {testing::random_tensor({n, d}, rng, 1.0, false),
          testing::random_tensor({n, d}, rng, 1.0, false),
          testing::random_tensor({n, d}, rng, 1.0, false), tau};
}

double loss_value(const ContrastiveBatch& b, Objective o) {
  Tape tape;
  return contrastive_loss(tape, b, o).item();
}

TEST(CosineSim, ScaleInvariantAndBounded) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> u(7), v(7), u2(7);
    for (int k = 0; k < 7; ++k) {
      u[k] = rng.normal();
      v[k] = rng.normal();
      u2[k] = 2.0 * u[k];
    }
    const double c = cosine_sim(u, v);
    EXPECT_NEAR(cosine_sim(u2, v), c, 1e-15);
    EXPECT_LE(std::abs(c), 1.0);
  }
}

TEST(CosineSim, Errors) {
  const std::vector<double> zero = {0, 0}, one = {1, 0}, three = {1, 2, 3};
  EXPECT_THROW(cosine_sim(zero, one), ZeroNormError);
  EXPECT_THROW(cosine_sim(one, three), ShapeError);
}

TEST(InfoNce, EqualLogitsGiveLnTwo) {
  for (double tau : {0.05, 0.5, 2.0}) {
    const ContrastiveBatch b{Tensor::from_values({1, 2}, {1, 0}),
                             Tensor::from_values({1, 2}, {0.6, 0.8}),
                             Tensor::from_values({1, 2}, {0.6, -0.8}), tau};
    EXPECT_NEAR(loss_value(b, Objective::kWithHardNegatives), std::numbers::ln2, 1e-15);
  }
}

TEST(InfoNce, OppositeNegativeHandValue) {
  const ContrastiveBatch b{Tensor::from_values({1, 3}, {1, 2, 3}),
                           Tensor::from_values({1, 3}, {2, 4, 6}),
                           Tensor::from_values({1, 3}, {-1, -2, -3}), 1.0};
  EXPECT_NEAR(loss_value(b, Objective::kWithHardNegatives), 0.126928, 5e-7);
  EXPECT_NEAR(loss_value(b, Objective::kWithHardNegatives), std::log1p(std::exp(-2.0)),
              1e-14);
}

TEST(InfoNce, InBatchOnlyIsZeroForSingleAnchor) {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    ContrastiveBatch b = random_batch(rng, 1, 5, 0.05);
    b.negatives = Tensor();
    EXPECT_EQ(loss_value(b, Objective::kInBatchOnly), 0.0);
  }
}

TEST(InfoNce, MatchesNaiveDoubleLoop) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + rng.index(8);
    const std::size_t d = 1 + rng.index(32);
    const double tau = 0.02 + rng.uniform();
    const ContrastiveBatch b = random_batch(rng, n, d, tau);
    const Matrix a = rows_of(b.anchors), p = rows_of(b.positives),
                 ng = rows_of(b.negatives);
    const double with = loss_value(b, Objective::kWithHardNegatives);
    const double without = loss_value(b, Objective::kInBatchOnly);
    EXPECT_NEAR(with, testing::naive_infonce(a, p, ng, tau, true),
                1e-12 * std::max(1.0, with));
    EXPECT_NEAR(without, testing::naive_infonce(a, p, ng, tau, false),
                1e-12 * std::max(1.0, without));
    EXPECT_GE(with, without);
    EXPECT_GT(with, 0.0);
  }
}

TEST(InfoNce, PositiveRowScalingChangesNothing) {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const ContrastiveBatch b = random_batch(rng, 4, 6, 0.1);
    ContrastiveBatch scaled{b.anchors.clone(), b.positives.clone(), b.negatives.clone(),
                            b.temperature};
    for (const Tensor* t : {&scaled.anchors, &scaled.positives, &scaled.negatives}) {
      auto v = t->mutable_values();
      for (std::size_t r = 0; r < 4; ++r) {
        const double s = 0.1 + 10.0 * rng.uniform();
        for (std::size_t c = 0; c < 6; ++c) v[r * 6 + c] *= s;
      }
    }
    for (Objective o : {Objective::kWithHardNegatives, Objective::kInBatchOnly}) {
      EXPECT_NEAR(loss_value(b, o), loss_value(scaled, o), 1e-12);
    }
  }
}

// Aligned positive, opposed negative: the loss falls toward 0 as the
// temperature shrinks.
TEST(InfoNce, LossShrinksWithTemperatureInSeparatedBatch) {
  const ContrastiveBatch base{Tensor::from_values({1, 2}, {1, 0}),
                              Tensor::from_values({1, 2}, {3, 0}),
                              Tensor::from_values({1, 2}, {-2, 0}), 1.0};
  double previous = INFINITY;
  for (double tau : {2.0, 1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01}) {
    ContrastiveBatch b = base;
    b.temperature = tau;
    const double loss = loss_value(b, Objective::kWithHardNegatives);
    EXPECT_LE(loss, previous) << tau;
    previous = loss;
  }
  EXPECT_LT(previous, 1e-15);  // log1p(e^-400) underflows to 0
}

TEST(InfoNce, Errors) {
  Rng rng(5);
  ContrastiveBatch b = random_batch(rng, 3, 4, 0.0);
  EXPECT_THROW(loss_value(b, Objective::kWithHardNegatives), std::invalid_argument);
  EXPECT_THROW(loss_value(b, Objective::kInBatchOnly), std::invalid_argument);
  b.temperature = 0.05;
  b.negatives = Tensor();
  EXPECT_THROW(loss_value(b, Objective::kWithHardNegatives), std::invalid_argument);
  b.negatives = testing::random_tensor({2, 4}, rng, 1.0, false);
  EXPECT_THROW(loss_value(b, Objective::kWithHardNegatives), ShapeError);
  b = random_batch(rng, 3, 4, 0.05);
  b.anchors.mutable_values()[0] = 0.0;
  b.anchors.mutable_values()[1] = 0.0;
  b.anchors.mutable_values()[2] = 0.0;
  b.anchors.mutable_values()[3] = 0.0;
  EXPECT_THROW(loss_value(b, Objective::kWithHardNegatives), ZeroNormError);
}

TEST(InfoNce, StableAtTinyTemperature) {
  Rng rng(6);
  const ContrastiveBatch b = random_batch(rng, 8, 16, 1e-4);
  EXPECT_TRUE(std::isfinite(loss_value(b, Objective::kWithHardNegatives)));
  EXPECT_TRUE(std::isfinite(loss_value(b, Objective::kInBatchOnly)));
}

TEST(Objective, NamesRoundTrip) {
  EXPECT_EQ(parse_objective("eq1"), Objective::kWithHardNegatives);
  EXPECT_EQ(parse_objective(objective_name(Objective::kInBatchOnly)),
            Objective::kInBatchOnly);
  EXPECT_THROW(parse_objective("eq3"), std::invalid_argument);
}

}  // namespace
}  // namespace embedlab
