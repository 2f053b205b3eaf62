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

#include "embedlab/checkpoint.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <system_error>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "embedlab/errors.h"

namespace embedlab {
namespace {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string format_double(double x) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), end);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw CheckpointError(
        fmt::format("checkpoint: field {} has malformed value '{}'", key, text));
  }
  return value;
}

std::string join_targets(const std::set<Projection>& targets) {
  std::vector<std::string_view> names;
  for (Projection p : targets) names.push_back(projection_name(p));
  return fmt::format("{}", fmt::join(names, ","));
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(text);
  while (std::getline(in, part, sep)) parts.push_back(part);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

// Ordered key/value pairs; order is part of the byte format.
using Manifest = std::vector<std::pair<std::string, std::string>>;

}  // namespace

Manifest config_fields(const ModelConfig& m, const TrainConfig& t) {
  return {
      {"model.vocab_size", std::to_string(m.vocab_size)},
      {"model.d_model", std::to_string(m.d_model)},
      {"model.n_layers", std::to_string(m.n_layers)},
      {"model.n_heads", std::to_string(m.n_heads)},
      {"model.d_ff", std::to_string(m.d_ff)},
      {"model.max_seq_len", std::to_string(m.max_seq_len)},
      {"model.pad_token_id", std::to_string(m.pad_token_id)},
      {"model.eos_token_id", std::to_string(m.eos_token_id)},
      {"train.learning_rate", format_double(t.learning_rate)},
      {"train.batch_size", std::to_string(t.batch_size)},
      {"train.warmup_steps", std::to_string(t.warmup_steps)},
      {"train.max_epochs", std::to_string(t.max_epochs)},
      {"train.temperature", format_double(t.temperature)},
      {"train.objective", std::string(objective_name(t.objective))},
      {"train.seed", std::to_string(t.seed)},
      {"train.num_shards", std::to_string(t.num_shards)},
      {"train.eta_min", format_double(t.eta_min)},
      {"train.checkpoint_interval", std::to_string(t.checkpoint_interval)},
      {"lora.rank", std::to_string(t.lora.rank)},
      {"lora.alpha", format_double(t.lora.alpha)},
      {"lora.dropout", format_double(t.lora.dropout)},
      {"lora.targets", join_targets(t.lora.targets)},
  };
}

namespace {

class FieldReader {
 public:
  explicit FieldReader(std::map<std::string, std::string> fields)
      : fields_(std::move(fields)) {}

  const std::string& text(const std::string& key) {
    auto it = fields_.find(key);
    if (it == fields_.end()) {
      throw CheckpointError(fmt::format("checkpoint: missing field {}", key));
    }
    used_.push_back(key);
    return it->second;
  }
  int integer(const std::string& key) { return parse_number<int>(key, text(key)); }
  std::int64_t int64(const std::string& key) {
    return parse_number<std::int64_t>(key, text(key));
  }
  std::uint64_t uint64(const std::string& key) {
    return parse_number<std::uint64_t>(key, text(key));
  }
  double real(const std::string& key) { return parse_number<double>(key, text(key)); }

  void reject_unused() const {
    for (const auto& [key, value] : fields_) {
      if (std::find(used_.begin(), used_.end(), key) == used_.end()) {
        throw CheckpointError(fmt::format("checkpoint: unknown field {}", key));
      }
    }
  }

 private:
  std::map<std::string, std::string> fields_;
  std::vector<std::string> used_;
};

void append_le(std::string& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double read_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  double x;
  std::memcpy(&x, &bits, sizeof x);
  return x;
}

}  // namespace

const Tensor* Checkpoint::find(std::string_view name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return &t.tensor;
  }
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  Manifest manifest = config_fields(checkpoint.model, checkpoint.train);
  manifest.emplace_back("step", std::to_string(checkpoint.step));
  manifest.emplace_back("total_steps", std::to_string(checkpoint.total_steps));
  manifest.emplace_back("rng.dropout", checkpoint.dropout_rng_state);
  manifest.emplace_back("tensor_count", std::to_string(checkpoint.tensors.size()));

  std::string payload;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < checkpoint.tensors.size(); ++i) {
    const NamedTensor& t = checkpoint.tensors[i];
    if (t.name.find_first_of("|\n=") != std::string::npos) {
      throw CheckpointError(fmt::format("checkpoint: invalid tensor name '{}'", t.name));
    }
    manifest.emplace_back(
        fmt::format("tensor.{:04d}", i),
        fmt::format("{}|{}|{}|{}", t.name, fmt::join(t.tensor.shape(), ","),
                    offset, t.tensor.size()));
    for (double x : t.tensor.values()) append_le(payload, x);
    offset += t.tensor.size();
  }
  manifest.emplace_back("payload_bytes", std::to_string(payload.size()));
  manifest.emplace_back("payload_fnv1a64", fmt::format("{:016x}", fnv1a64(payload)));

  std::string body;
  for (const auto& [key, value] : manifest) {
    if (value.find('\n') != std::string::npos) {
      throw CheckpointError(fmt::format("checkpoint: field {} contains a newline", key));
    }
    body += key;
    body += '=';
    body += value;
    body += '\n';
  }
  return fmt::format("{}\nmanifest_bytes={}\n", kCheckpointMagic, body.size()) +
         body + payload;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  const std::string magic_line = std::string(kCheckpointMagic) + "\n";
  if (bytes.substr(0, magic_line.size()) != magic_line) {
    throw CheckpointError("checkpoint: bad magic");
  }
  bytes.remove_prefix(magic_line.size());
  const std::size_t eol = bytes.find('\n');
  constexpr std::string_view kLengthKey = "manifest_bytes=";
  if (eol == std::string_view::npos || bytes.substr(0, kLengthKey.size()) != kLengthKey) {
    throw CheckpointError("checkpoint: missing manifest length");
  }
  const auto manifest_bytes = parse_number<std::size_t>(
      "manifest_bytes",
      std::string(bytes.substr(kLengthKey.size(), eol - kLengthKey.size())));
  bytes.remove_prefix(eol + 1);
  if (bytes.size() < manifest_bytes) {
    throw CheckpointError("checkpoint: truncated manifest");
  }
  const std::string body(bytes.substr(0, manifest_bytes));
  const std::string_view payload = bytes.substr(manifest_bytes);

  std::map<std::string, std::string> fields;
  std::istringstream lines(body);
  std::string line;
  while (std::getline(lines, line)) {
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw CheckpointError(fmt::format("checkpoint: malformed manifest line '{}'", line));
    }
    if (!fields.emplace(line.substr(0, eq), line.substr(eq + 1)).second) {
      throw CheckpointError(
          fmt::format("checkpoint: duplicate field {}", line.substr(0, eq)));
    }
  }
  FieldReader r(std::move(fields));

  const auto payload_bytes = r.uint64("payload_bytes");
  if (payload.size() != payload_bytes) {
    throw CheckpointError(fmt::format(
        "checkpoint: payload is {} bytes, manifest declares {}", payload.size(),
        payload_bytes));
  }
  if (r.text("payload_fnv1a64") != fmt::format("{:016x}", fnv1a64(payload))) {
    throw CheckpointError("checkpoint: payload checksum mismatch");
  }

  Checkpoint c;
  c.model.vocab_size = r.integer("model.vocab_size");
  c.model.d_model = r.integer("model.d_model");
  c.model.n_layers = r.integer("model.n_layers");
  c.model.n_heads = r.integer("model.n_heads");
  c.model.d_ff = r.integer("model.d_ff");
  c.model.max_seq_len = r.integer("model.max_seq_len");
  c.model.pad_token_id = r.integer("model.pad_token_id");
  c.model.eos_token_id = r.integer("model.eos_token_id");
  c.train.learning_rate = r.real("train.learning_rate");
  c.train.batch_size = r.integer("train.batch_size");
  c.train.warmup_steps = r.integer("train.warmup_steps");
  c.train.max_epochs = r.integer("train.max_epochs");
  c.train.temperature = r.real("train.temperature");
  try {
    c.train.objective = parse_objective(r.text("train.objective"));
    c.train.lora.targets = parse_lora_targets(split(r.text("lora.targets"), ','));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(fmt::format("checkpoint: {}", e.what()));
  }
  c.train.seed = r.uint64("train.seed");
  c.train.num_shards = r.integer("train.num_shards");
  c.train.eta_min = r.real("train.eta_min");
  c.train.checkpoint_interval = r.integer("train.checkpoint_interval");
  c.train.lora.rank = r.integer("lora.rank");
  c.train.lora.alpha = r.real("lora.alpha");
  c.train.lora.dropout = r.real("lora.dropout");
  c.step = r.int64("step");
  c.total_steps = r.int64("total_steps");
  c.dropout_rng_state = r.text("rng.dropout");

  const auto count = r.uint64("tensor_count");
  const std::size_t n_values = payload.size() / 8;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string key = fmt::format("tensor.{:04d}", i);
    const auto parts = split(r.text(key), '|');
    if (parts.size() != 4) {
      throw CheckpointError(fmt::format("checkpoint: malformed {}", key));
    }
    Shape shape;
    for (const std::string& d : split(parts[1], ',')) {
      shape.push_back(parse_number<std::size_t>(key, d));
    }
    const auto offset = parse_number<std::size_t>(key, parts[2]);
    const auto size = parse_number<std::size_t>(key, parts[3]);
    if (shape.empty() || num_elements(shape) != size || offset > n_values ||
        size > n_values - offset) {
      throw CheckpointError(fmt::format("checkpoint: {} is inconsistent", key));
    }
    std::vector<double> values(size);
    for (std::size_t j = 0; j < size; ++j) {
      values[j] = read_le(payload.data() + 8 * (offset + j));
    }
    c.tensors.push_back({parts[0], Tensor::from_values(shape, std::move(values))});
  }
  r.reject_unused();
  return c;
}

void save_checkpoint(const fs::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw CheckpointError(fmt::format("cannot write checkpoint {}", tmp.string()));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) {
      throw CheckpointError(fmt::format("cannot write checkpoint {}", tmp.string()));
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    throw CheckpointError(
        fmt::format("cannot rename checkpoint to {}: {}", path.string(), ec.message()));
  }
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError(fmt::format("cannot open checkpoint {}", path.string()));
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_checkpoint(buf.str());
  } catch (const CheckpointError& e) {
    throw CheckpointError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string checkpoint_filename(std::int64_t step) {
  return fmt::format("checkpoint-{:06d}.ckpt", step);
}

std::vector<CheckpointEntry> list_checkpoints(const fs::path& dir) {
  static const std::regex kName(R"(checkpoint-(\d+)\.ckpt)");
  std::vector<CheckpointEntry> entries;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (std::regex_match(name, m, kName)) {
      entries.push_back({std::stoll(m[1].str()), entry.path()});
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.step < b.step; });
  return entries;
}

}  // namespace embedlab
