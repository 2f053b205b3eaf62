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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "embedlab/dataset.h"
#include "embedlab/lora.h"
#include "embedlab/stats.h"
#include "embedlab/tokenizer.h"

namespace embedlab {

// Maps sentences to fixed-length vectors, one row per input.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<std::vector<double>> embed(
      std::span<const std::string> sentences) const = 0;
};

// EOS-pooled embeddings of a model in evaluation mode.
class ModelEmbedder : public Embedder {
 public:
  // Throws std::invalid_argument if the model is in training mode.
  explicit ModelEmbedder(const LoraModel& model, std::size_t batch_size = 64);

  std::vector<std::vector<double>> embed(
      std::span<const std::string> sentences) const override;

 private:
  const LoraModel& model_;
  ByteTokenizer tokenizer_;
  std::size_t batch_size_;
};

struct EvalReport {
  std::string benchmark;
  double spearman_pct = 0.0;
  std::size_t n_pairs = 0;
  std::string prompt;
};

// Cosine similarity of each pair after wrapping both sentences in
// `prompt`, correlated with the gold scores, times 100. Throws
// DegenerateEvaluation when every predicted similarity is the same.
EvalReport evaluate_sts(const Embedder& embedder,
                        std::span<const StsRecord> records,
                        const PromptTemplate& prompt,
                        const std::string& benchmark);

struct AggregateReport {
  std::vector<EvalReport> reports;
  Aggregate overall;
};

AggregateReport make_aggregate_report(std::vector<EvalReport> reports);

// Columns benchmark,spearman_pct,n_pairs,prompt.
void write_report_csv(const std::filesystem::path& path,
                      const AggregateReport& report);
// {"mean", "std", "display", "benchmarks": [...]}.
void write_aggregate_json(const std::filesystem::path& path,
                          const AggregateReport& report);

struct NamedStsSet {
  std::string name;
  std::vector<StsRecord> records;
};

struct CurveRow {
  std::int64_t step = 0;
  std::filesystem::path checkpoint;
  std::optional<double> overall;  // empty when the row failed
  std::string error;
};

struct CurveResult {
  std::vector<CurveRow> rows;
  std::optional<std::int64_t> convergence_step;
};

// Earliest step from which every successful row stays within `tolerance`
// of the last successful row's overall.
std::optional<std::int64_t> convergence_step(std::span<const CurveRow> rows,
                                             double tolerance = 0.5);

// Evaluates every checkpoint in `dir` in step order on every dataset. A
// checkpoint that fails to load or evaluate yields a failed row.
CurveResult checkpoint_curve(const std::filesystem::path& dir,
                             std::span<const NamedStsSet> datasets,
                             const PromptTemplate& prompt = {},
                             double tolerance = 0.5);

// Columns step,overall; failed rows carry "failed".
void write_curve_csv(const std::filesystem::path& path, const CurveResult& curve);

}  // namespace embedlab
