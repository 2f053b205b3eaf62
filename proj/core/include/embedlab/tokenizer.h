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
#include <string_view>
#include <vector>

#include "embedlab/model.h"

namespace embedlab {

// Text pattern with exactly one "{original_sentence}" placeholder.
class PromptTemplate {
 public:
  static constexpr std::string_view kPlaceholder = "{original_sentence}";

  // The identity template.
  PromptTemplate() = default;
  // Throws std::invalid_argument unless the placeholder occurs exactly once.
  PromptTemplate(std::string id, std::string pattern);

  // "none", "prompt1", "prompt2" or "prompt3".
  static PromptTemplate named(std::string_view id);

  const std::string& id() const { return id_; }
  const std::string& pattern() const { return pattern_; }
  std::string apply(std::string_view sentence) const;

 private:
  std::string id_ = "none";
  std::string pattern_ = std::string(kPlaceholder);
};

struct PreparedInput {
  std::vector<int> ids;  // text bytes followed by EOS
  std::size_t eos_position = 0;
  bool truncated = false;
};

// Byte-level tokenizer: ids 0-255 are raw bytes, plus dedicated PAD and EOS.
class ByteTokenizer {
 public:
  explicit ByteTokenizer(int max_seq_len = 64, int pad_id = 256,
                         int eos_id = 257);
  explicit ByteTokenizer(const ModelConfig& config)
      : ByteTokenizer(config.max_seq_len, config.pad_token_id,
                      config.eos_token_id) {}

  int max_seq_len() const { return max_seq_len_; }
  int pad_id() const { return pad_id_; }
  int eos_id() const { return eos_id_; }

  std::vector<int> encode(std::string_view text) const;
  // Byte ids up to the first EOS; PAD is skipped.
  std::string decode(std::span<const int> ids) const;

  // Applies the template, keeps at most max_seq_len - 1 bytes of the result
  // and appends EOS. Throws std::invalid_argument on empty text.
  PreparedInput prepare(std::string_view text,
                        const PromptTemplate& prompt = {}) const;

  // Right-pads to the longest input.
  TokenBatch make_batch(std::span<const PreparedInput> inputs) const;
  TokenBatch make_batch(std::span<const std::string> texts,
                        const PromptTemplate& prompt = {}) const;

 private:
  int max_seq_len_;
  int pad_id_;
  int eos_id_;
};

}  // namespace embedlab
