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

#include "embedlab/trainer.h"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "embedlab/errors.h"
#include "embedlab/objective.h"

namespace embedlab {
namespace {

namespace fs = std::filesystem;

// Keeps the dropout stream independent of the initialization stream.
constexpr std::uint64_t kDropoutStreamSalt = 0x6a09e667f3bcc908ull;
constexpr const char* kLossLogName = "loss_log.csv";

std::string shortest(double x) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), end);
}

std::vector<NamedTensor> expected_tensors(const TrainState& state) {
  std::vector<NamedTensor> out = state.model.base().named_parameters();
  const std::vector<NamedTensor> adapters = state.model.named_adapter_parameters();
  out.insert(out.end(), adapters.begin(), adapters.end());
  return out;
}

void check_finite(double loss) {
  if (!std::isfinite(loss)) {
    throw NonFiniteLoss(fmt::format("non-finite loss {}", loss));
  }
}

void ensure_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw CheckpointError(fmt::format("checkpoint directory {} is not writable: {}",
                                      dir.string(), ec.message()));
  }
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out || !(out << "ok") || !out.flush()) {
      throw CheckpointError(
          fmt::format("checkpoint directory {} is not writable", dir.string()));
    }
  }
  fs::remove(probe, ec);
}

// Rows of an existing loss log with step < `before`.
std::vector<std::string> kept_log_rows(const fs::path& path, std::int64_t before) {
  std::vector<std::string> rows;
  std::ifstream in(path);
  std::string line;
  if (!in || !std::getline(in, line)) return rows;
  while (std::getline(in, line)) {
    std::int64_t step = 0;
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + comma, step);
    if (ec == std::errc() && step < before) rows.push_back(line);
  }
  return rows;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("train: learning_rate must be > 0");
  }
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (warmup_steps < 0) {
    throw std::invalid_argument("train: warmup_steps must be >= 0");
  }
  if (max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("train: temperature must be > 0");
  }
  if (num_shards < 1) throw std::invalid_argument("train: num_shards must be >= 1");
  if (num_shards > 1 && batch_size % num_shards != 0) {
    throw std::invalid_argument(fmt::format(
        "train: num_shards {} does not divide batch_size {}", num_shards,
        batch_size));
  }
  if (!(eta_min >= 0.0)) throw std::invalid_argument("train: eta_min must be >= 0");
  if (checkpoint_interval < 1) {
    throw std::invalid_argument("train: checkpoint_interval must be >= 1");
  }
  lora.validate();
}

std::int64_t steps_per_epoch(const TrainConfig& config, std::size_t n_records) {
  const auto b = static_cast<std::size_t>(config.batch_size);
  return static_cast<std::int64_t>((n_records + b - 1) / b);
}

std::int64_t total_steps(const TrainConfig& config, std::size_t n_records) {
  return steps_per_epoch(config, n_records) * config.max_epochs;
}

TrainState init_training(const ModelConfig& model_config,
                         const TrainConfig& config) {
  model_config.validate();
  config.validate();
  Rng init_rng(config.seed);
  TransformerLM base(model_config, init_rng);
  LoraModel model(std::move(base), config.lora, init_rng);
  model.set_training(true);
  AdamW optimizer(model.trainable_parameters());
  return TrainState{std::move(model), std::move(optimizer),
                    Rng(splitmix64(config.seed ^ kDropoutStreamSalt)), 0};
}

LrSchedule make_schedule(const TrainConfig& config, std::int64_t total_steps) {
  return LrSchedule{config.learning_rate, config.warmup_steps, total_steps,
                    config.eta_min};
}

double accumulate_batch_gradient(TrainState& state,
                                 std::span<const TripletRecord> batch,
                                 const ByteTokenizer& tokenizer,
                                 const TrainConfig& config) {
  const TripletTokens tokens = tokenize_triplets(batch, tokenizer);
  Tape tape;
  ContrastiveBatch cb;
  cb.temperature = config.temperature;
  cb.anchors = state.model.embed(tape, tokens.premises, &state.dropout_rng);
  cb.positives = state.model.embed(tape, tokens.entailments, &state.dropout_rng);
  if (config.objective == Objective::kWithHardNegatives) {
    cb.negatives =
        state.model.embed(tape, tokens.contradictions, &state.dropout_rng);
  }
  const Tensor loss = contrastive_loss(tape, cb, config.objective);
  const double value = loss.item();
  check_finite(value);
  tape.backward(loss);
  return value;
}

StepResult train_step(TrainState& state, std::span<const TripletRecord> batch,
                      const ByteTokenizer& tokenizer, const TrainConfig& config,
                      const LrSchedule& schedule) {
  const double lr = schedule.lr_at(state.step);
  state.optimizer.zero_grad();
  const double loss = accumulate_batch_gradient(state, batch, tokenizer, config);
  state.optimizer.step(lr);
  ++state.step;
  return {loss, lr};
}

ShardedStepResult sharded_step(TrainState& state,
                               std::span<const TripletRecord> batch,
                               std::size_t num_shards,
                               const ByteTokenizer& tokenizer,
                               const TrainConfig& config,
                               const LrSchedule& schedule) {
  if (num_shards < 1 || batch.empty() || batch.size() % num_shards != 0) {
    throw std::invalid_argument(fmt::format(
        "sharded_step: {} shards do not divide a batch of {}", num_shards,
        batch.size()));
  }
  ShardedStepResult result;
  result.lr = schedule.lr_at(state.step);
  const std::vector<Tensor>& params = state.optimizer.params();
  const std::size_t shard_size = batch.size() / num_shards;
  for (std::size_t k = 0; k < num_shards; ++k) {
    state.optimizer.zero_grad();
    result.shard_losses.push_back(accumulate_batch_gradient(
        state, batch.subspan(k * shard_size, shard_size), tokenizer, config));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto g = params[i].grad();
      if (k == 0) {
        result.averaged_gradient.emplace_back(g.begin(), g.end());
      } else {
        auto& sum = result.averaged_gradient[i];
        for (std::size_t j = 0; j < g.size(); ++j) sum[j] += g[j];
      }
    }
  }
  const auto k = static_cast<double>(num_shards);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& mean = result.averaged_gradient[i];
    auto g = params[i].mutable_grad();
    for (std::size_t j = 0; j < g.size(); ++j) {
      mean[j] /= k;
      g[j] = mean[j];
    }
  }
  state.optimizer.step(result.lr);
  ++state.step;
  return result;
}

Checkpoint capture_checkpoint(const TrainState& state, const TrainConfig& config,
                              std::int64_t total_steps) {
  Checkpoint c;
  c.model = state.model.base().config();
  c.train = config;
  c.step = state.step;
  c.total_steps = total_steps;
  c.dropout_rng_state = state.dropout_rng.state();
  for (const NamedTensor& t : expected_tensors(state)) {
    c.tensors.push_back({t.name, t.tensor.clone()});
  }
  const std::vector<NamedTensor> adapters = state.model.named_adapter_parameters();
  const auto& m = state.optimizer.first_moments();
  const auto& v = state.optimizer.second_moments();
  for (std::size_t i = 0; i < adapters.size(); ++i) {
    c.tensors.push_back({"adam.m/" + adapters[i].name,
                         Tensor::from_values(adapters[i].tensor.shape(), m[i])});
  }
  for (std::size_t i = 0; i < adapters.size(); ++i) {
    c.tensors.push_back({"adam.v/" + adapters[i].name,
                         Tensor::from_values(adapters[i].tensor.shape(), v[i])});
  }
  return c;
}

void apply_checkpoint(TrainState& state, const TrainConfig& config,
                      const Checkpoint& checkpoint) {
  std::vector<std::string> diffs;
  const auto stored = config_fields(checkpoint.model, checkpoint.train);
  const auto live = config_fields(state.model.base().config(), config);
  for (std::size_t i = 0; i < stored.size(); ++i) {
    if (stored[i].second != live[i].second) {
      diffs.push_back(fmt::format("{}: checkpoint {} vs expected {}",
                                  stored[i].first, stored[i].second,
                                  live[i].second));
    }
  }

  // Target tensors in checkpoint order, with their expected shapes.
  std::vector<NamedTensor> targets = expected_tensors(state);
  const std::vector<NamedTensor> adapters = state.model.named_adapter_parameters();
  for (const char* prefix : {"adam.m/", "adam.v/"}) {
    for (const NamedTensor& a : adapters) {
      targets.push_back({prefix + a.name, a.tensor});
    }
  }
  std::map<std::string, const Tensor*> by_name;
  for (const NamedTensor& t : checkpoint.tensors) by_name[t.name] = &t.tensor;
  for (const NamedTensor& t : targets) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) {
      diffs.push_back(fmt::format("tensor {}: missing from checkpoint", t.name));
      continue;
    }
    if (it->second->shape() != t.tensor.shape()) {
      diffs.push_back(fmt::format("tensor {}: checkpoint shape {} vs expected {}",
                                  t.name, shape_string(it->second->shape()),
                                  shape_string(t.tensor.shape())));
    }
    by_name.erase(it);
  }
  for (const auto& [name, tensor] : by_name) {
    diffs.push_back(fmt::format("tensor {}: not expected by this model", name));
  }
  Rng dropout_rng;
  try {
    dropout_rng.set_state(checkpoint.dropout_rng_state);
  } catch (const std::exception& e) {
    diffs.push_back(fmt::format("rng.dropout: {}", e.what()));
  }
  if (!diffs.empty()) {
    throw CheckpointError(
        fmt::format("checkpoint mismatch:\n  {}", fmt::join(diffs, "\n  ")));
  }

  const std::size_t n_model = targets.size() - 2 * adapters.size();
  for (std::size_t i = 0; i < n_model; ++i) {
    const auto src = checkpoint.find(targets[i].name)->values();
    auto dst = targets[i].tensor.mutable_values();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  std::vector<std::vector<double>> m, v;
  for (const NamedTensor& a : adapters) {
    const auto sm = checkpoint.find("adam.m/" + a.name)->values();
    const auto sv = checkpoint.find("adam.v/" + a.name)->values();
    m.emplace_back(sm.begin(), sm.end());
    v.emplace_back(sv.begin(), sv.end());
  }
  state.optimizer.restore(checkpoint.step, std::move(m), std::move(v));
  state.dropout_rng = dropout_rng;
  state.step = checkpoint.step;
}

LoraModel model_from_checkpoint(const Checkpoint& checkpoint) {
  TrainState state = init_training(checkpoint.model, checkpoint.train);
  apply_checkpoint(state, checkpoint.train, checkpoint);
  state.model.set_training(false);
  return std::move(state.model);
}

TrainingSummary run_training(const ModelConfig& model_config,
                             const TrainConfig& config,
                             std::span<const TripletRecord> records,
                             const fs::path& out_dir,
                             const TrainingOptions& options) {
  model_config.validate();
  config.validate();
  if (records.empty()) throw std::invalid_argument("train: no training records");
  const auto n = records.size();
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  const auto shards = static_cast<std::size_t>(config.num_shards);
  if (shards > 1 && (n % batch_size) % shards != 0) {
    throw std::invalid_argument(fmt::format(
        "train: final partial batch of {} is not divisible by {} shards",
        n % batch_size, shards));
  }
  ensure_writable(out_dir);

  TrainingSummary summary;
  summary.total_steps = total_steps(config, n);
  summary.loss_log = out_dir / kLossLogName;
  const std::int64_t per_epoch = steps_per_epoch(config, n);

  TrainState state = init_training(model_config, config);
  if (options.resume_from) {
    const Checkpoint checkpoint = load_checkpoint(*options.resume_from);
    if (checkpoint.total_steps != summary.total_steps) {
      throw CheckpointError(fmt::format(
          "checkpoint mismatch:\n  total_steps: checkpoint {} vs expected {}",
          checkpoint.total_steps, summary.total_steps));
    }
    apply_checkpoint(state, config, checkpoint);
  }

  {
    const std::vector<std::string> kept =
        options.resume_from ? kept_log_rows(summary.loss_log, state.step)
                            : std::vector<std::string>{};
    std::ofstream log(summary.loss_log, std::ios::trunc);
    log << "step,loss,lr\n";
    for (const std::string& row : kept) log << row << '\n';
  }
  std::ofstream log(summary.loss_log, std::ios::app);

  auto save = [&] {
    const fs::path path = out_dir / checkpoint_filename(state.step);
    save_checkpoint(path, capture_checkpoint(state, config, summary.total_steps));
    summary.final_checkpoint = path;
  };
  if (state.step == 0) save();

  const ByteTokenizer tokenizer(model_config);
  const LrSchedule schedule = make_schedule(config, summary.total_steps);
  std::int64_t plan_epoch = -1;
  std::vector<std::vector<std::size_t>> plan;
  while (state.step < summary.total_steps) {
    const std::int64_t epoch = state.step / per_epoch;
    const std::int64_t index = state.step % per_epoch;
    if (epoch != plan_epoch) {
      plan = plan_batches(n, batch_size,
                          splitmix64(config.seed ^ static_cast<std::uint64_t>(epoch)));
      plan_epoch = epoch;
    }
    std::vector<TripletRecord> batch;
    for (std::size_t i : plan[index]) batch.push_back(records[i]);

    StepLog entry{state.step, 0.0, 0.0};
    try {
      if (shards > 1) {
        const ShardedStepResult r =
            sharded_step(state, batch, shards, tokenizer, config, schedule);
        double total = 0.0;
        for (double l : r.shard_losses) total += l;
        entry.loss = total / static_cast<double>(r.shard_losses.size());
        entry.lr = r.lr;
      } else {
        const StepResult r = train_step(state, batch, tokenizer, config, schedule);
        entry.loss = r.loss;
        entry.lr = r.lr;
      }
    } catch (const NonFiniteLoss& e) {
      throw NonFiniteLoss(fmt::format(
          "{} at step {} (epoch {}, batch {}); record indices [{}]", e.what(),
          entry.step, epoch, index, fmt::join(plan[index], ", ")));
    }
    log << entry.step << ',' << shortest(entry.loss) << ',' << shortest(entry.lr)
        << '\n';
    log.flush();
    summary.steps.push_back(entry);
    if (options.on_step) options.on_step(entry);
    if (state.step % config.checkpoint_interval == 0 ||
        state.step == summary.total_steps) {
      save();
    }
  }
  if (summary.final_checkpoint.empty()) {
    summary.final_checkpoint = out_dir / checkpoint_filename(state.step);
  }
  return summary;
}

}  // namespace embedlab
