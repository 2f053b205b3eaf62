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

#include "embedlab/dataset.h"

#include <charconv>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string_view>

#include <fmt/format.h>
#include "json.hpp"

#include "embedlab/errors.h"
#include "embedlab/rng.h"

namespace embedlab {
namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  }
  return in;
}

std::string required_text(const json& obj, const char* key,
                          const std::filesystem::path& path, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw DataError(path.string(), line, fmt::format("missing key '{}'", key));
  }
  if (!it->is_string()) {
    throw DataError(path.string(), line,
                    fmt::format("key '{}' must be a string", key));
  }
  std::string value = it->get<std::string>();
  if (trim(value).empty()) {
    throw DataError(path.string(), line, fmt::format("empty field '{}'", key));
  }
  return value;
}

json parse_object(const std::string& text, const std::filesystem::path& path,
                  std::size_t line) {
  json obj = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw DataError(path.string(), line, "malformed JSON object");
  }
  return obj;
}

double checked_score(double score, const std::filesystem::path& path,
                     std::size_t line) {
  if (!(score >= 0.0 && score <= 5.0)) {
    throw DataError(path.string(), line,
                    fmt::format("score {} outside [0, 5]", score));
  }
  return score;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  }
  return out;
}

}  // namespace

std::vector<TripletRecord> load_triplets(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<TripletRecord> records;
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    if (trim(text).empty()) continue;
    const json obj = parse_object(text, path, line);
    records.push_back({required_text(obj, "premise", path, line),
                       required_text(obj, "entailment", path, line),
                       required_text(obj, "contradiction", path, line)});
  }
  return records;
}

std::vector<StsRecord> load_sts(const std::filesystem::path& path) {
  enum class Format { kUnknown, kJson, kTsv };
  std::ifstream in = open_input(path);
  std::vector<StsRecord> records;
  Format format = Format::kUnknown;
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    const std::string_view body = trim(text);
    if (body.empty()) continue;
    const Format this_line = body.front() == '{' ? Format::kJson : Format::kTsv;
    if (format == Format::kUnknown) format = this_line;
    if (this_line != format) {
      throw DataError(path.string(), line,
                      format == Format::kJson
                          ? "TSV line in a JSON-lines file"
                          : "JSON line in a TSV file");
    }

    if (format == Format::kJson) {
      const json obj = parse_object(text, path, line);
      StsRecord r{required_text(obj, "sentence1", path, line),
                  required_text(obj, "sentence2", path, line), 0.0};
      auto score = obj.find("score");
      if (score == obj.end() || !score->is_number()) {
        throw DataError(path.string(), line, "missing numeric key 'score'");
      }
      r.gold_score = checked_score(score->get<double>(), path, line);
      records.push_back(std::move(r));
      continue;
    }

    std::string_view row = text;
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    std::vector<std::string_view> cols;
    for (std::size_t start = 0;;) {
      const auto tab = row.find('\t', start);
      cols.push_back(row.substr(start, tab == std::string_view::npos
                                           ? std::string_view::npos
                                           : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 3) {
      throw DataError(path.string(), line,
                      fmt::format("expected 3 tab-separated columns, got {}",
                                  cols.size()));
    }
    if (trim(cols[0]).empty() || trim(cols[1]).empty()) {
      throw DataError(path.string(), line, "empty sentence");
    }
    const std::string_view score_text = trim(cols[2]);
    double score = 0.0;
    auto [end, ec] = std::from_chars(
        score_text.data(), score_text.data() + score_text.size(), score);
    if (ec != std::errc() || end != score_text.data() + score_text.size()) {
      throw DataError(path.string(), line,
                      fmt::format("score '{}' is not a number", score_text));
    }
    records.push_back({std::string(cols[0]), std::string(cols[1]),
                       checked_score(score, path, line)});
  }
  return records;
}

void save_triplets(const std::filesystem::path& path,
                   std::span<const TripletRecord> records) {
  std::ofstream out = open_output(path);
  for (const TripletRecord& r : records) {
    json obj = {{"premise", r.premise},
                {"entailment", r.entailment},
                {"contradiction", r.contradiction}};
    out << obj.dump() << '\n';
  }
}

void save_sts(const std::filesystem::path& path,
              std::span<const StsRecord> records) {
  std::ofstream out = open_output(path);
  for (const StsRecord& r : records) {
    json obj = {{"sentence1", r.sentence1},
                {"sentence2", r.sentence2},
                {"score", r.gold_score}};
    out << obj.dump() << '\n';
  }
}

TripletTokens tokenize_triplets(std::span<const TripletRecord> records,
                                const ByteTokenizer& tokenizer) {
  std::vector<PreparedInput> p, e, c;
  TripletTokens out;
  for (const TripletRecord& r : records) {
    p.push_back(tokenizer.prepare(r.premise));
    e.push_back(tokenizer.prepare(r.entailment));
    c.push_back(tokenizer.prepare(r.contradiction));
    out.truncated += p.back().truncated + e.back().truncated +
                     c.back().truncated;
  }
  out.premises = tokenizer.make_batch(p);
  out.entailments = tokenizer.make_batch(e);
  out.contradictions = tokenizer.make_batch(c);
  return out;
}

std::vector<std::vector<std::size_t>> plan_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   std::uint64_t shuffle_seed) {
  if (n == 0) throw std::invalid_argument("batching: empty dataset");
  if (batch_size == 0) throw std::invalid_argument("batching: batch_size < 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(shuffle_seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.index(i + 1)]);
  }
  std::vector<std::vector<std::size_t>> plan;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    plan.emplace_back(order.begin() + start, order.begin() + end);
  }
  return plan;
}

BatchIterator::BatchIterator(std::span<const TripletRecord> records,
                             std::size_t batch_size, std::uint64_t shuffle_seed,
                             const ByteTokenizer& tokenizer)
    : records_(records),
      plan_(plan_batches(records.size(), batch_size, shuffle_seed)),
      tokenizer_(&tokenizer) {}

std::optional<TripletBatch> BatchIterator::next() {
  if (cursor_ >= plan_.size()) return std::nullopt;
  TripletBatch batch;
  batch.indices = plan_[cursor_++];
  for (std::size_t i : batch.indices) batch.records.push_back(records_[i]);
  batch.tokens = tokenize_triplets(batch.records, *tokenizer_);
  return batch;
}

BatchIterator batch_iterator(std::span<const TripletRecord> records,
                             std::size_t batch_size, std::uint64_t shuffle_seed,
                             const ByteTokenizer& tokenizer) {
  return BatchIterator(records, batch_size, shuffle_seed, tokenizer);
}

}  // namespace embedlab
