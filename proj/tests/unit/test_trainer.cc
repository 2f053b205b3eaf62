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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "embedlab/checkpoint.h"
#include "embedlab/errors.h"
#include "embedlab/optimizer.h"
#include "embedlab/schedule.h"
#include "embedlab/synthetic.h"
#include "embedlab/trainer.h"
#include "oracles.h"

namespace embedlab {
namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_layers = 1;
  c.d_ff = 32;
  c.max_seq_len = 32;
  return c;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.learning_rate = 1e-3;
  t.batch_size = 8;
  t.warmup_steps = 2;
  t.lora.rank = 4;
  t.lora.alpha = 16;
  t.checkpoint_interval = 4;
  return t;
}

std::vector<double> flat_params(const std::vector<NamedTensor>& params) {
  std::vector<double> out;
  for (const NamedTensor& p : params) {
    out.insert(out.end(), p.tensor.values().begin(), p.tensor.values().end());
  }
  return out;
}

std::vector<std::vector<double>> grads_of(const TrainState& s) {
  std::vector<std::vector<double>> out;
  for (const Tensor& t : s.model.trainable_parameters()) {
    out.emplace_back(t.grad().begin(), t.grad().end());
  }
  return out;
}

// Schedule ------------------------------------------------------------------

TEST(Schedule, WarmupEndsAtBaseRate) {
  const LrSchedule s{5e-5, 100, 1000, 0.0};
  EXPECT_EQ(s.lr_at(99), 5e-5);
  EXPECT_NEAR(s.lr_at(49), 2.5e-5, 1e-18);
  EXPECT_NEAR(s.lr_at(0), 5e-7, 1e-20);
}

TEST(Schedule, AnnealingMidpointIsHalf) {
  const LrSchedule s{5e-5, 100, 1100, 0.0};
  EXPECT_NEAR(s.lr_at(600), 2.5e-5, 1e-18);
}

TEST(Schedule, MatchesClosedFormEverywhere) {
  for (const LrSchedule s : {LrSchedule{5e-5, 100, 4583, 0.0},
                             LrSchedule{1e-3, 0, 57, 1e-5},
                             LrSchedule{2e-4, 13, 14, 0.0}}) {
    for (std::int64_t step = 0; step < s.total_steps; ++step) {
      EXPECT_NEAR(s.lr_at(step),
                  testing::closed_form_lr(step, s.base_lr, s.warmup_steps,
                                          s.total_steps, s.eta_min),
                  1e-12 * s.base_lr)
          << step;
    }
  }
}

TEST(Schedule, RejectsStepsOutsideRun) {
  const LrSchedule s{5e-5, 10, 20, 0.0};
  EXPECT_THROW(s.lr_at(20), std::out_of_range);
  EXPECT_THROW(s.lr_at(-1), std::out_of_range);
}

// Optimizer -----------------------------------------------------------------

TEST(AdamW, MatchesHandRolledUpdates) {
  Tensor w = Tensor::from_values({2}, {0.5, -1.5}, true);
  AdamWConfig cfg;
  cfg.weight_decay = 0.01;
  AdamW opt({w}, cfg);
  double w0 = 0.5, m = 0.0, v = 0.0;
  const double grads[] = {0.3, -0.1, 2.0, 0.0};
  for (int t = 1; t <= 4; ++t) {
    opt.zero_grad();
    w.mutable_grad()[0] = grads[t - 1];
    opt.step(1e-2);
    const double g = grads[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    w0 -= 1e-2 * (mh / (std::sqrt(vh) + 1e-8) + 0.01 * w0);
    EXPECT_NEAR(w.values()[0], w0, 1e-15) << t;
  }
  EXPECT_EQ(opt.step_count(), 4);
}

TEST(AdamW, RejectsFrozenParameters) {
  EXPECT_THROW(AdamW({Tensor::zeros({2})}), std::invalid_argument);
  AdamW opt({Tensor::zeros({2}, true)});
  EXPECT_THROW(opt.restore(1, {{0.0}}, {{0.0, 0.0}}), std::invalid_argument);
}

// Steps ---------------------------------------------------------------------

class TrainerTest : public ::testing::Test {
 protected:
  SyntheticCorpus corpus = synthetic_corpus(1, 4, 10);
  ModelConfig model = tiny_model();
  TrainConfig train = tiny_train();
  ByteTokenizer tok{model};

  std::span<const TripletRecord> batch(std::size_t start, std::size_t n) const {
    return std::span(corpus.triplets).subspan(start, n);
  }
};

TEST_F(TrainerTest, RepeatedBatchLossFalls) {
  TrainState s = init_training(model, train);
  const LrSchedule sched = make_schedule(train, 50);
  // Two triplets from each cluster.
  std::vector<TripletRecord> b;
  for (std::size_t i = 0; i < corpus.triplets.size(); ++i) {
    if (corpus.triplet_premise_cluster[i] == static_cast<int>(b.size() / 2)) {
      b.push_back(corpus.triplets[i]);
    }
    if (b.size() == 8) break;
  }
  ASSERT_EQ(b.size(), 8u);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 50; ++i) {
    const StepResult r = train_step(s, b, tok, train, sched);
    if (i == 0) first = r.loss;
    last = r.loss;
  }
  EXPECT_LT(last, first);
  EXPECT_EQ(s.step, 50);
  EXPECT_EQ(s.optimizer.step_count(), 50);
}

TEST_F(TrainerTest, SameSeedIsBitIdentical) {
  const LrSchedule sched = make_schedule(train, 20);
  TrainState a = init_training(model, train);
  TrainState b = init_training(model, train);
  for (int i = 0; i < 20; ++i) {
    const auto slice = batch((i % 5) * 8, 8);
    EXPECT_EQ(train_step(a, slice, tok, train, sched).loss,
              train_step(b, slice, tok, train, sched).loss);
  }
  EXPECT_EQ(flat_params(a.model.named_adapter_parameters()),
            flat_params(b.model.named_adapter_parameters()));
}

TEST_F(TrainerTest, BaseWeightsStayFrozen) {
  TrainState s = init_training(model, train);
  const std::vector<double> before = flat_params(s.model.base().named_parameters());
  const std::vector<double> adapters = flat_params(s.model.named_adapter_parameters());
  const LrSchedule sched = make_schedule(train, 5);
  for (int i = 0; i < 5; ++i) train_step(s, batch(i * 8, 8), tok, train, sched);
  EXPECT_EQ(flat_params(s.model.base().named_parameters()), before);
  EXPECT_NE(flat_params(s.model.named_adapter_parameters()), adapters);
}

TEST_F(TrainerTest, SingleShardEqualsPlainStep) {
  const LrSchedule sched = make_schedule(train, 3);
  TrainState a = init_training(model, train);
  TrainState b = init_training(model, train);
  for (int i = 0; i < 3; ++i) {
    const StepResult r = train_step(a, batch(i * 8, 8), tok, train, sched);
    const ShardedStepResult sr = sharded_step(b, batch(i * 8, 8), 1, tok, train, sched);
    ASSERT_EQ(sr.shard_losses.size(), 1u);
    EXPECT_EQ(sr.shard_losses[0], r.loss);
    EXPECT_EQ(sr.lr, r.lr);
  }
  EXPECT_EQ(flat_params(a.model.named_adapter_parameters()),
            flat_params(b.model.named_adapter_parameters()));
  EXPECT_EQ(a.dropout_rng, b.dropout_rng);
}

TEST_F(TrainerTest, ShardGradientsAreAveraged) {
  const LrSchedule sched = make_schedule(train, 1);
  TrainState sharded = init_training(model, train);
  TrainState oracle = init_training(model, train);
  const auto global = batch(0, 8);

  // Sequential microbatches on an identical state, averaged by hand.
  std::vector<std::vector<double>> mean;
  std::vector<double> losses;
  for (std::size_t k = 0; k < 4; ++k) {
    oracle.optimizer.zero_grad();
    losses.push_back(accumulate_batch_gradient(oracle, global.subspan(k * 2, 2), tok, train));
    const auto g = grads_of(oracle);
    if (mean.empty()) mean.assign(g.size(), {});
    for (std::size_t t = 0; t < g.size(); ++t) {
      mean[t].resize(g[t].size(), 0.0);
      for (std::size_t i = 0; i < g[t].size(); ++i) mean[t][i] += g[t][i] / 4.0;
    }
  }

  const ShardedStepResult r = sharded_step(sharded, global, 4, tok, train, sched);
  EXPECT_EQ(r.shard_losses, losses);
  ASSERT_EQ(r.averaged_gradient.size(), mean.size());
  for (std::size_t t = 0; t < mean.size(); ++t) {
    for (std::size_t i = 0; i < mean[t].size(); ++i) {
      EXPECT_NEAR(r.averaged_gradient[t][i], mean[t][i], 1e-12);
    }
  }
}

TEST_F(TrainerTest, ShardsSeeFewerNegatives) {
  TrainConfig cfg = train;
  cfg.lora.dropout = 0.0;  // same forward for both runs
  const LrSchedule sched = make_schedule(cfg, 1);
  TrainState a = init_training(model, cfg);
  TrainState b = init_training(model, cfg);
  const double full = train_step(a, batch(0, 8), tok, cfg, sched).loss;
  const ShardedStepResult r = sharded_step(b, batch(0, 8), 2, tok, cfg, sched);
  ASSERT_EQ(r.shard_losses.size(), 2u);
  EXPECT_NE(r.shard_losses[0], full);
  EXPECT_NE(r.shard_losses[1], full);
}

TEST_F(TrainerTest, ShardCountMustDivideBatch) {
  TrainState s = init_training(model, train);
  const LrSchedule sched = make_schedule(train, 1);
  EXPECT_THROW(sharded_step(s, batch(0, 8), 3, tok, train, sched), std::invalid_argument);
  TrainConfig bad = train;
  bad.num_shards = 3;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST_F(TrainerTest, NonFiniteLossLeavesParametersAlone) {
  TrainConfig cfg = train;
  cfg.temperature = 1e-310;  // 1/t overflows
  TrainState s = init_training(model, cfg);
  const std::vector<double> before = flat_params(s.model.named_adapter_parameters());
  EXPECT_THROW(train_step(s, batch(0, 8), tok, cfg, make_schedule(cfg, 1)), NonFiniteLoss);
  EXPECT_EQ(flat_params(s.model.named_adapter_parameters()), before);
  EXPECT_EQ(s.step, 0);
}

TEST(TrainConfig, StepArithmetic) {
  TrainConfig t;
  EXPECT_EQ(steps_per_epoch(t, 275), 5);
  EXPECT_EQ(steps_per_epoch(t, 600), 10);
  t.max_epochs = 3;
  EXPECT_EQ(total_steps(t, 275000), 3 * 4584);
}

// Checkpoints ---------------------------------------------------------------

TEST_F(TrainerTest, CheckpointRoundTripIsByteIdentical) {
  TrainState s = init_training(model, train);
  const LrSchedule sched = make_schedule(train, 3);
  for (int i = 0; i < 3; ++i) train_step(s, batch(i * 8, 8), tok, train, sched);
  const Checkpoint ck = capture_checkpoint(s, train, 3);
  const std::string bytes = serialize_checkpoint(ck);
  const Checkpoint back = parse_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  ASSERT_EQ(back.tensors.size(), ck.tensors.size());
  for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
    EXPECT_EQ(back.tensors[i].name, ck.tensors[i].name);
    EXPECT_TRUE(std::equal(back.tensors[i].tensor.values().begin(),
                           back.tensors[i].tensor.values().end(),
                           ck.tensors[i].tensor.values().begin()));
  }
  EXPECT_EQ(back.model, model);
  EXPECT_EQ(back.train, train);

  const auto dir = testing::scratch_dir("ckpt_roundtrip");
  save_checkpoint(dir / "a.ckpt", ck);
  save_checkpoint(dir / "b.ckpt", load_checkpoint(dir / "a.ckpt"));
  EXPECT_EQ(testing::read_file(dir / "a.ckpt"), testing::read_file(dir / "b.ckpt"));
}

TEST_F(TrainerTest, CorruptedCheckpointsAreRejected) {
  const TrainState s = init_training(model, train);
  const std::string bytes = serialize_checkpoint(capture_checkpoint(s, train, 1));
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 9)), CheckpointError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(parse_checkpoint(bad_magic), CheckpointError);
  std::string flipped = bytes;
  flipped[flipped.size() - 3] ^= 0x40;
  EXPECT_THROW(parse_checkpoint(flipped), CheckpointError);
  EXPECT_THROW(parse_checkpoint(""), CheckpointError);
}

TEST_F(TrainerTest, MismatchedWidthNamesTensorAndChangesNothing) {
  const TrainState source = init_training(model, train);
  const Checkpoint ck = capture_checkpoint(source, train, 1);
  ModelConfig wider = model;
  wider.d_model = 32;
  TrainState target = init_training(wider, train);
  const std::vector<double> before = flat_params(target.model.named_adapter_parameters());
  try {
    apply_checkpoint(target, train, ck);
    FAIL();
  } catch (const CheckpointError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("model.d_model"), std::string::npos) << msg;
    EXPECT_NE(msg.find("token_embedding"), std::string::npos) << msg;
  }
  EXPECT_EQ(flat_params(target.model.named_adapter_parameters()), before);
}

TEST_F(TrainerTest, ConfigMismatchIsListed) {
  const TrainState source = init_training(model, train);
  const Checkpoint ck = capture_checkpoint(source, train, 1);
  TrainConfig other = train;
  other.learning_rate = 2e-3;
  TrainState target = init_training(model, other);
  try {
    apply_checkpoint(target, other, ck);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("train.learning_rate"), std::string::npos);
  }
}

TEST(CheckpointFiles, NamingAndListing) {
  EXPECT_EQ(checkpoint_filename(20), "checkpoint-000020.ckpt");
  const auto dir = testing::scratch_dir("ckpt_list");
  for (int step : {40, 0, 20}) std::ofstream(dir / checkpoint_filename(step)) << "x";
  std::ofstream(dir / "notes.txt") << "x";
  const auto entries = list_checkpoints(dir);
  ASSERT_EQ(entries.size(), 3u);
  EXPECT_EQ(entries[0].step, 0);
  EXPECT_EQ(entries[2].step, 40);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
}

// Full runs -------------------------------------------------------------------

std::vector<std::string> csv_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::string> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(line);
  return rows;
}

TEST(RunTraining, OneEpochOfSixHundred) {
  const SyntheticCorpus c = synthetic_corpus(4, 4, 150);
  ASSERT_EQ(c.triplets.size(), 600u);
  TrainConfig cfg = tiny_train();
  cfg.batch_size = 60;
  cfg.checkpoint_interval = 20;
  const auto dir = testing::scratch_dir("run_600");
  const TrainingSummary s = run_training(tiny_model(), cfg, c.triplets, dir);
  EXPECT_EQ(s.total_steps, 10);
  EXPECT_EQ(s.steps.size(), 10u);
  const auto entries = list_checkpoints(dir);
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].step, 0);
  EXPECT_EQ(entries[1].step, 10);
  EXPECT_EQ(s.final_checkpoint, entries[1].path);
  const auto rows = csv_rows(s.loss_log);
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[0], "step,loss,lr");
  EXPECT_EQ(rows[1].substr(0, 2), "0,");
}

TEST(RunTraining, ResumeMatchesUninterruptedRun) {
  const SyntheticCorpus c = synthetic_corpus(5, 4, 10);
  TrainConfig cfg = tiny_train();
  cfg.max_epochs = 3;  // 15 steps, crossing epoch boundaries
  cfg.checkpoint_interval = 4;
  const auto full = testing::scratch_dir("resume_full");
  run_training(tiny_model(), cfg, c.triplets, full);

  const auto resumed = testing::scratch_dir("resume_part");
  std::filesystem::copy_file(full / checkpoint_filename(8), resumed / checkpoint_filename(8));
  TrainingOptions opts;
  opts.resume_from = resumed / checkpoint_filename(8);
  const TrainingSummary s = run_training(tiny_model(), cfg, c.triplets, resumed, opts);
  EXPECT_EQ(s.steps.size(), 7u);
  EXPECT_EQ(testing::read_file(full / checkpoint_filename(15)),
            testing::read_file(resumed / checkpoint_filename(15)));
}

TEST(RunTraining, ResumeKeepsEarlierLogRows) {
  const SyntheticCorpus c = synthetic_corpus(5, 4, 10);
  TrainConfig cfg = tiny_train();
  cfg.checkpoint_interval = 2;
  const auto dir = testing::scratch_dir("resume_log");
  run_training(tiny_model(), cfg, c.triplets, dir);
  const auto full_log = csv_rows(dir / "loss_log.csv");
  TrainingOptions opts;
  opts.resume_from = dir / checkpoint_filename(2);
  run_training(tiny_model(), cfg, c.triplets, dir, opts);
  EXPECT_EQ(csv_rows(dir / "loss_log.csv"), full_log);
}

TEST(RunTraining, UnwritableDirectoryFailsBeforeTraining) {
  const auto dir = testing::scratch_dir("unwritable");
  std::ofstream(dir / "file") << "x";
  const SyntheticCorpus c = synthetic_corpus(5, 4, 10);
  int steps = 0;
  TrainingOptions opts;
  opts.on_step = [&](const StepLog&) { ++steps; };
  EXPECT_THROW(run_training(tiny_model(), tiny_train(), c.triplets, dir / "file" / "sub", opts),
               CheckpointError);
  EXPECT_EQ(steps, 0);
}

TEST(RunTraining, ShardedRunProducesSameStepCount) {
  const SyntheticCorpus c = synthetic_corpus(6, 4, 10);
  TrainConfig cfg = tiny_train();
  cfg.num_shards = 4;
  const auto dir = testing::scratch_dir("sharded_run");
  const TrainingSummary s = run_training(tiny_model(), cfg, c.triplets, dir);
  EXPECT_EQ(s.total_steps, 5);
  for (const StepLog& l : s.steps) EXPECT_TRUE(std::isfinite(l.loss));
}

}  // namespace
}  // namespace embedlab
