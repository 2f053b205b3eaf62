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

#include "embedlab/tokenizer.h"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace embedlab {

PromptTemplate::PromptTemplate(std::string id, std::string pattern)
    : id_(std::move(id)), pattern_(std::move(pattern)) {
  const auto first = pattern_.find(kPlaceholder);
  if (first == std::string::npos ||
      pattern_.find(kPlaceholder, first + 1) != std::string::npos) {
    throw std::invalid_argument(fmt::format(
        "prompt '{}': pattern must contain {} exactly once", id_, kPlaceholder));
  }
}

PromptTemplate PromptTemplate::named(std::string_view id) {
  if (id == "none") return {};
  if (id == "prompt1") {
    return {"prompt1", "This sentence: {original_sentence} means in one word: "};
  }
  if (id == "prompt2") {
    return {"prompt2", "This sentence {original_sentence} means: "};
  }
  if (id == "prompt3") return {"prompt3", "{original_sentence} is: "};
  throw std::invalid_argument(fmt::format(
      "unknown prompt '{}' (expected none, prompt1, prompt2 or prompt3)", id));
}

std::string PromptTemplate::apply(std::string_view sentence) const {
  std::string out = pattern_;
  out.replace(out.find(kPlaceholder), kPlaceholder.size(), sentence);
  return out;
}

ByteTokenizer::ByteTokenizer(int max_seq_len, int pad_id, int eos_id)
    : max_seq_len_(max_seq_len), pad_id_(pad_id), eos_id_(eos_id) {
  if (max_seq_len_ < 2) {
    throw std::invalid_argument("tokenizer: max_seq_len must be >= 2");
  }
  if (pad_id_ < 256 || eos_id_ < 256 || pad_id_ == eos_id_) {
    throw std::invalid_argument(
        "tokenizer: PAD and EOS need distinct ids outside the byte range");
  }
}

std::vector<int> ByteTokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(static_cast<unsigned char>(c));
  return ids;
}

std::string ByteTokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == eos_id_) break;
    if (id == pad_id_) continue;
    if (id < 0 || id > 255) {
      throw std::out_of_range(fmt::format("tokenizer: id {} is not a byte", id));
    }
    out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
  }
  return out;
}

PreparedInput ByteTokenizer::prepare(std::string_view text,
                                     const PromptTemplate& prompt) const {
  if (text.empty()) throw std::invalid_argument("tokenizer: empty text");
  PreparedInput out;
  out.ids = encode(prompt.apply(text));
  const auto budget = static_cast<std::size_t>(max_seq_len_ - 1);
  if (out.ids.size() > budget) {
    out.ids.resize(budget);
    out.truncated = true;
  }
  out.ids.push_back(eos_id_);
  out.eos_position = out.ids.size() - 1;
  return out;
}

TokenBatch ByteTokenizer::make_batch(
    std::span<const PreparedInput> inputs) const {
  if (inputs.empty()) throw std::invalid_argument("tokenizer: empty batch");
  TokenBatch batch;
  batch.batch = inputs.size();
  for (const PreparedInput& in : inputs) {
    batch.length = std::max(batch.length, in.ids.size());
  }
  batch.tokens.assign(batch.batch * batch.length, pad_id_);
  batch.is_pad.assign(batch.batch * batch.length, 1);
  batch.eos_positions.resize(batch.batch);
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    const PreparedInput& in = inputs[b];
    std::copy(in.ids.begin(), in.ids.end(),
              batch.tokens.begin() + b * batch.length);
    std::fill_n(batch.is_pad.begin() + b * batch.length, in.ids.size(), 0);
    batch.eos_positions[b] = in.eos_position;
  }
  return batch;
}

TokenBatch ByteTokenizer::make_batch(std::span<const std::string> texts,
                                     const PromptTemplate& prompt) const {
  std::vector<PreparedInput> prepared;
  prepared.reserve(texts.size());
  for (const std::string& t : texts) prepared.push_back(prepare(t, prompt));
  return make_batch(prepared);
}

}  // namespace embedlab
