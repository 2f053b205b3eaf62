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

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "embedlab/eval.h"
#include "embedlab/objective.h"
#include "embedlab/ops.h"
#include "embedlab/stats.h"
#include "embedlab/synthetic.h"
#include "embedlab/trainer.h"

namespace embedlab {
namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng, bool grad = false) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.normal();
  return Tensor::from_values({rows, cols}, std::move(v), grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(ops::matmul(tape, a, b));
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_InfoNceForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const ContrastiveBatch batch{random_matrix(n, 64, rng, true), random_matrix(n, 64, rng, true),
                               random_matrix(n, 64, rng, true), 0.05};
  for (auto _ : state) {
    Tape tape;
    tape.backward(infonce_loss(tape, batch));
  }
}
BENCHMARK(BM_InfoNceForwardBackward)->Arg(10)->Arg(60);

void BM_EmbedBatch(benchmark::State& state) {
  TrainState s = init_training(ModelConfig{}, TrainConfig{});
  s.model.set_training(false);
  const ModelEmbedder embedder(s.model);
  const SyntheticCorpus corpus = synthetic_corpus(1, 4, 16);
  std::vector<std::string> texts;
  for (const TripletRecord& r : corpus.triplets) texts.push_back(r.premise);
  for (auto _ : state) benchmark::DoNotOptimize(embedder.embed(texts));
  state.SetItemsProcessed(state.iterations() * texts.size());
}
BENCHMARK(BM_EmbedBatch)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  TrainConfig tc;
  tc.batch_size = static_cast<int>(state.range(0));
  const SyntheticCorpus corpus = synthetic_corpus(1, 4, 50);
  TrainState s = init_training(ModelConfig{}, tc);
  const ByteTokenizer tok{ModelConfig{}};
  const LrSchedule schedule{1e-4, 0, 1 << 30, 0.0};
  const auto batch = std::span(corpus.triplets).subspan(0, tc.batch_size);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(s, batch, tok, tc, schedule));
}
BENCHMARK(BM_TrainStep)->Arg(10)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_Spearman(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    y[i] = rng.normal();
  }
  for (auto _ : state) benchmark::DoNotOptimize(spearman(x, y));
}
BENCHMARK(BM_Spearman)->Arg(1000)->Arg(100000);

}  // namespace
}  // namespace embedlab

BENCHMARK_MAIN();
