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

#include "embedlab/model.h"
#include "embedlab/tokenizer.h"

namespace embedlab {

// One NLI training triplet.
struct TripletRecord {
  std::string premise;
  std::string entailment;
  std::string contradiction;

  friend bool operator==(const TripletRecord&, const TripletRecord&) = default;
};

// One evaluation pair with a gold similarity in [0, 5].
struct StsRecord {
  std::string sentence1;
  std::string sentence2;
  double gold_score = 0.0;

  friend bool operator==(const StsRecord&, const StsRecord&) = default;
};

// JSON lines with keys premise / entailment / contradiction. Blank lines are
// skipped. Errors name the offending line.
std::vector<TripletRecord> load_triplets(const std::filesystem::path& path);

// JSON lines (sentence1, sentence2, score) or TSV sentence1<TAB>sentence2<TAB>
// score. The first record fixes the format for the whole file.
std::vector<StsRecord> load_sts(const std::filesystem::path& path);

void save_triplets(const std::filesystem::path& path,
                   std::span<const TripletRecord> records);
void save_sts(const std::filesystem::path& path,
              std::span<const StsRecord> records);

// Tokenized premise, entailment and contradiction blocks of one batch.
struct TripletTokens {
  TokenBatch premises;
  TokenBatch entailments;
  TokenBatch contradictions;
  std::size_t truncated = 0;
};

TripletTokens tokenize_triplets(std::span<const TripletRecord> records,
                                const ByteTokenizer& tokenizer);

// Record indices of each batch for one pass over `n` records, shuffled with
// a Fisher-Yates permutation drawn from `shuffle_seed`. The final partial
// batch is kept.
std::vector<std::vector<std::size_t>> plan_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   std::uint64_t shuffle_seed);

struct TripletBatch {
  std::vector<std::size_t> indices;
  std::vector<TripletRecord> records;
  TripletTokens tokens;
};

// Deterministic single pass over a triplet dataset.
class BatchIterator {
 public:
  // Throws std::invalid_argument on an empty dataset or batch_size < 1.
  BatchIterator(std::span<const TripletRecord> records, std::size_t batch_size,
                std::uint64_t shuffle_seed, const ByteTokenizer& tokenizer);

  std::optional<TripletBatch> next();
  std::size_t num_batches() const { return plan_.size(); }

 private:
  std::span<const TripletRecord> records_;
  std::vector<std::vector<std::size_t>> plan_;
  const ByteTokenizer* tokenizer_;
  std::size_t cursor_ = 0;
};

BatchIterator batch_iterator(std::span<const TripletRecord> records,
                             std::size_t batch_size, std::uint64_t shuffle_seed,
                             const ByteTokenizer& tokenizer);

}  // namespace embedlab
