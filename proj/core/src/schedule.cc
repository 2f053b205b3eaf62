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

#include "embedlab/schedule.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace embedlab {

double LrSchedule::lr_at(std::int64_t step) const {
  if (step < 0 || step >= total_steps) {
    throw std::out_of_range(fmt::format(
        "lr_at: step {} outside [0, {})", step, total_steps));
  }
  if (step < warmup_steps) {
    return base_lr * static_cast<double>(step + 1) /
           static_cast<double>(warmup_steps);
  }
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  return eta_min +
         (base_lr - eta_min) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace embedlab
