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

namespace embedlab {

// Linear warmup to the base rate, then cosine annealing to eta_min.
struct LrSchedule {
  double base_lr = 5e-5;
  std::int64_t warmup_steps = 100;
  std::int64_t total_steps = 1;
  double eta_min = 0.0;

  // step < warmup:  base * (step + 1) / warmup
  // otherwise:      eta_min + (base - eta_min) *
  //                   (1 + cos(pi * (step - warmup) / (total - warmup))) / 2
  // Throws std::out_of_range unless 0 <= step < total_steps.
  double lr_at(std::int64_t step) const;
};

}  // namespace embedlab
