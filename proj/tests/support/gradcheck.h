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
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "embedlab/rng.h"
#include "embedlab/tensor.h"

namespace embedlab::testing {

// Builds a differentiable output from the inputs on a fresh tape. Must be a
// pure function of the input values.
using Builder = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

struct GradCase {
  Builder build;
  std::vector<Tensor> inputs;  // all require grad
};

// Worst relative error over the inputs between the tape gradient and
// central finite differences (Ridders-extrapolated from initial step h).
// Per input the error is
//   |analytic - numeric|_2 / max(|analytic|_2 + |numeric|_2, 1e-6).
// The floor turns a 1e-6 bound into an absolute 1e-12 for gradients whose
// norm is below 1e-6, where differencing is dominated by rounding.
// Non-scalar outputs are reduced with a fixed random projection first.
double gradcheck(const GradCase& c, double h = 1e-3);

Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0,
                     bool requires_grad = true);

struct KernelCase {
  std::string name;
  std::function<GradCase(Rng&)> make;  // one random instance
};

// Every differentiable kernel, both contrastive objectives and a LoRA
// transformer end to end.
std::vector<KernelCase> kernel_cases();

// Keeps parameterized test names readable.
inline void PrintTo(const KernelCase& k, std::ostream* os) { *os << k.name; }

}  // namespace embedlab::testing
