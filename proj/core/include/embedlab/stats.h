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
#include <string>
#include <vector>

namespace embedlab {

// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

// Throws std::invalid_argument on unequal lengths or fewer than 2 points,
// and DegenerateEvaluation when either input is constant.
double pearson(std::span<const double> x, std::span<const double> y);

// Pearson correlation of average ranks, in [-1, 1].
double spearman(std::span<const double> x, std::span<const double> y);

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population (divide by n)

  // "83.84 ± 4.27"
  std::string display() const;
};

// Throws std::invalid_argument on an empty list.
Aggregate aggregate(std::span<const double> scores);

// after - before, in percentage points.
double performance_gain(double after_overall, double before_overall);

}  // namespace embedlab
