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

#include "embedlab/eval.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "embedlab/checkpoint.h"
#include "embedlab/errors.h"
#include "embedlab/objective.h"
#include "embedlab/trainer.h"
#include "json.hpp"

namespace embedlab {
namespace {

namespace fs = std::filesystem;

std::string shortest(double x) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), end);
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  return out;
}

// Similarities closer than this are treated as equal when checking for a
// degenerate evaluation; identical vectors can differ in the last ulp.
constexpr double kDegenerateSpread = 1e-12;

}  // namespace

ModelEmbedder::ModelEmbedder(const LoraModel& model, std::size_t batch_size)
    : model_(model), tokenizer_(model.base().config()), batch_size_(batch_size) {
  if (model.training()) {
    throw std::invalid_argument("embedder: model must be in evaluation mode");
  }
  if (batch_size_ == 0) throw std::invalid_argument("embedder: batch_size must be >= 1");
}

std::vector<std::vector<double>> ModelEmbedder::embed(
    std::span<const std::string> sentences) const {
  std::vector<std::vector<double>> out;
  out.reserve(sentences.size());
  for (std::size_t start = 0; start < sentences.size(); start += batch_size_) {
    const auto chunk =
        sentences.subspan(start, std::min(batch_size_, sentences.size() - start));
    const TokenBatch batch = tokenizer_.make_batch(chunk);
    Tape tape;
    const Tensor e = model_.embed(tape, batch);
    const std::size_t d = e.dim(1);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto row = e.values().subspan(i * d, d);
      out.emplace_back(row.begin(), row.end());
    }
  }
  return out;
}

EvalReport evaluate_sts(const Embedder& embedder,
                        std::span<const StsRecord> records,
                        const PromptTemplate& prompt,
                        const std::string& benchmark) {
  if (records.empty()) {
    throw std::invalid_argument(fmt::format("{}: no STS pairs", benchmark));
  }
  std::vector<std::string> texts;
  texts.reserve(2 * records.size());
  for (const StsRecord& r : records) {
    texts.push_back(prompt.apply(r.sentence1));
    texts.push_back(prompt.apply(r.sentence2));
  }
  const auto vectors = embedder.embed(texts);
  if (vectors.size() != texts.size()) {
    throw std::runtime_error("embedder returned the wrong number of vectors");
  }
  std::vector<double> sims, gold;
  for (std::size_t i = 0; i < records.size(); ++i) {
    sims.push_back(cosine_sim(vectors[2 * i], vectors[2 * i + 1]));
    gold.push_back(records[i].gold_score);
  }
  const auto [lo, hi] = std::minmax_element(sims.begin(), sims.end());
  if (*hi - *lo <= kDegenerateSpread) {
    throw DegenerateEvaluation(fmt::format(
        "{}: degenerate evaluation, all {} predicted similarities equal {}",
        benchmark, sims.size(), *lo));
  }
  double rho = 0.0;
  try {
    rho = spearman(sims, gold);
  } catch (const DegenerateEvaluation& e) {
    throw DegenerateEvaluation(fmt::format("{}: {}", benchmark, e.what()));
  }
  return {benchmark, 100.0 * rho, records.size(), prompt.id()};
}

AggregateReport make_aggregate_report(std::vector<EvalReport> reports) {
  std::vector<double> scores;
  for (const EvalReport& r : reports) scores.push_back(r.spearman_pct);
  const Aggregate overall = aggregate(scores);
  return {std::move(reports), overall};
}

void write_report_csv(const fs::path& path, const AggregateReport& report) {
  std::ofstream out = open_output(path);
  out << "benchmark,spearman_pct,n_pairs,prompt\n";
  for (const EvalReport& r : report.reports) {
    out << r.benchmark << ',' << shortest(r.spearman_pct) << ',' << r.n_pairs
        << ',' << r.prompt << '\n';
  }
}

void write_aggregate_json(const fs::path& path, const AggregateReport& report) {
  nlohmann::ordered_json j;
  j["mean"] = report.overall.mean;
  j["std"] = report.overall.std;
  j["display"] = report.overall.display();
  j["benchmarks"] = nlohmann::ordered_json::array();
  for (const EvalReport& r : report.reports) {
    j["benchmarks"].push_back({{"benchmark", r.benchmark},
                               {"spearman_pct", r.spearman_pct},
                               {"n_pairs", r.n_pairs},
                               {"prompt", r.prompt}});
  }
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
}

std::optional<std::int64_t> convergence_step(std::span<const CurveRow> rows,
                                             double tolerance) {
  std::optional<double> final_overall;
  for (const CurveRow& r : rows) {
    if (r.overall) final_overall = r.overall;
  }
  if (!final_overall) return std::nullopt;
  std::optional<std::int64_t> step;
  for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
    if (!it->overall) continue;
    if (std::abs(*it->overall - *final_overall) > tolerance) break;
    step = it->step;
  }
  return step;
}

CurveResult checkpoint_curve(const fs::path& dir,
                             std::span<const NamedStsSet> datasets,
                             const PromptTemplate& prompt, double tolerance) {
  if (datasets.empty()) throw std::invalid_argument("curve: no STS datasets");
  if (!fs::is_directory(dir)) {
    throw std::runtime_error(
        fmt::format("curve: {} is not a directory", dir.string()));
  }
  const std::vector<CheckpointEntry> entries = list_checkpoints(dir);
  if (entries.empty()) {
    throw std::runtime_error(
        fmt::format("curve: no checkpoints in {}", dir.string()));
  }
  CurveResult result;
  for (const CheckpointEntry& entry : entries) {
    CurveRow row{entry.step, entry.path, std::nullopt, {}};
    try {
      const LoraModel model = model_from_checkpoint(load_checkpoint(entry.path));
      const ModelEmbedder embedder(model);
      std::vector<EvalReport> reports;
      for (const NamedStsSet& set : datasets) {
        reports.push_back(evaluate_sts(embedder, set.records, prompt, set.name));
      }
      row.overall = make_aggregate_report(std::move(reports)).overall.mean;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    result.rows.push_back(std::move(row));
  }
  result.convergence_step = convergence_step(result.rows, tolerance);
  return result;
}

void write_curve_csv(const fs::path& path, const CurveResult& curve) {
  std::ofstream out = open_output(path);
  out << "step,overall\n";
  for (const CurveRow& r : curve.rows) {
    out << r.step << ',' << (r.overall ? shortest(*r.overall) : "failed") << '\n';
  }
}

}  // namespace embedlab
