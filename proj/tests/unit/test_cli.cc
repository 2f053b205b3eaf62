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

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.h"
#include "embedlab/checkpoint.h"
#include "json.hpp"
#include "oracles.h"

namespace embedlab {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_command(args, out, err);
  return {code, out.str(), err.str()};
}

const fs::path kData = fs::path(EMBEDLAB_SOURCE_DIR) / "data";
const std::string kTriplets = (kData / "synthetic_triplets.jsonl").string();
const std::string kSts = (kData / "synthetic_sts.jsonl").string();

TEST(Cli, AggregateMiniCpmColumn) {
  const fs::path dir = testing::scratch_dir("cli_aggregate");
  std::ofstream(dir / "scores.txt")
      << "76.38 87.61 81.55 87.33 85.25\n89.96, 86.51, 80.05, 79.87\n";
  const Result r = run({"aggregate", "--scores", (dir / "scores.txt").string(), "--out",
                        (dir / "out").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto j = nlohmann::json::parse(testing::read_file(dir / "out" / "aggregate.json"));
  EXPECT_NEAR(j["mean"].get<double>(), 83.84, 0.01);
  EXPECT_NEAR(j["std"].get<double>(), 4.27, 0.01);
  EXPECT_EQ(j["n"].get<int>(), 9);
  EXPECT_NE(r.out.find(" ± 4.27"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "out" / "resolved_config.json"));
}

TEST(Cli, TrainWithDefaultsOnBundledCorpus) {
  const fs::path dir = testing::scratch_dir("cli_train");
  const Result r = run({"train", "--triplets", kTriplets, "--out", dir.string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_FALSE(list_checkpoints(dir).empty());
  std::ifstream log(dir / "loss_log.csv");
  std::string header, first;
  std::getline(log, header);
  EXPECT_EQ(header, "step,loss,lr");
  EXPECT_TRUE(static_cast<bool>(std::getline(log, first)));
}

TEST(Cli, MissingCheckpointIsRuntimeErrorNamingPath) {
  const fs::path dir = testing::scratch_dir("cli_missing");
  const std::string path = (dir / "nope.ckpt").string();
  const Result r = run({"eval", "--sts", kSts, "--checkpoint", path, "--out", dir.string()});
  EXPECT_EQ(r.code, cli::kExitRuntime);
  EXPECT_NE(r.err.find(path), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"train", "--no-such-flag"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"train", "--objective", "eq9"}).code, cli::kExitUsage);
  const Result r = run({"eval", "--prompt", "prompt7"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("--prompt"), std::string::npos) << r.err;
}

TEST(Cli, UnknownConfigKeyIsRejected) {
  const fs::path dir = testing::scratch_dir("cli_badkey");
  std::ofstream(dir / "c.json") << R"({"train": {"learning_rate": 1e-4, "momentum": 0.9}})";
  const Result r = run({"train", "--config", (dir / "c.json").string(), "--triplets",
                        kTriplets, "--out", dir.string()});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("train.momentum"), std::string::npos) << r.err;
}

TEST(Cli, ShippedReferenceRecipeLoads) {
  const fs::path dir = testing::scratch_dir("cli_recipe");
  const Result r = run({"aggregate", "--config",
                        (fs::path(EMBEDLAB_SOURCE_DIR) / "configs" / "reference_recipe.json").string(),
                        "--scores", (dir / "missing.txt").string(), "--out", dir.string()});
  // Config parsed; the scores file is what fails.
  EXPECT_EQ(r.code, cli::kExitRuntime) << r.err;
  const auto j = nlohmann::json::parse(testing::read_file(fs::path(EMBEDLAB_SOURCE_DIR) /
                                                          "configs" / "reference_recipe.json"));
  EXPECT_EQ(j["train"]["batch_size"], 60);
  EXPECT_EQ(j["train"]["learning_rate"], 5e-5);
  EXPECT_EQ(j["lora"]["rank"], 8);
  EXPECT_EQ(j["lora"]["alpha"], 32);
}

TEST(Cli, FlagsOverrideConfigAndAreEchoed) {
  const fs::path dir = testing::scratch_dir("cli_override");
  std::ofstream(dir / "c.json") << R"({"train": {"learning_rate": 1e-4, "seed": 5}})";
  std::ofstream(dir / "s.txt") << "1 2 3\n";
  const Result r = run({"aggregate", "--config", (dir / "c.json").string(), "--lr", "3e-4",
                        "--scores", (dir / "s.txt").string(), "--out", dir.string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto j = nlohmann::json::parse(testing::read_file(dir / "resolved_config.json"));
  EXPECT_EQ(j["train"]["learning_rate"].get<double>(), 3e-4);
  EXPECT_EQ(j["train"]["seed"].get<int>(), 5);
}

TEST(Cli, ResolvedConfigReproducesRunBitForBit) {
  const fs::path first = testing::scratch_dir("cli_repro_a");
  const fs::path second = testing::scratch_dir("cli_repro_b");
  ASSERT_EQ(run({"train", "--triplets", kTriplets, "--batch-size", "50", "--lr", "1e-3",
                 "--seed", "7", "--objective", "eq2", "--out", first.string()})
                .code,
            cli::kExitOk);
  ASSERT_EQ(run({"train", "--config", (first / "resolved_config.json").string(), "--out",
                 second.string()})
                .code,
            cli::kExitOk);
  const auto a = list_checkpoints(first);
  const auto b = list_checkpoints(second);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(testing::read_file(a[i].path), testing::read_file(b[i].path));
  }
  EXPECT_EQ(testing::read_file(first / "loss_log.csv"),
            testing::read_file(second / "loss_log.csv"));
}

TEST(Cli, HelpListsEveryFlagWithDefaults) {
  const std::vector<std::string> common = {"--config", "--seed",   "--lr", "--objective",
                                           "--prompt", "--shards", "--out"};
  for (const std::string& sub : {"train", "eval", "embed", "curve", "aggregate"}) {
    const Result r = run({sub, "--help"});
    EXPECT_EQ(r.code, cli::kExitOk) << sub;
    const std::string text = r.out + r.err;
    for (const std::string& flag : common) {
      EXPECT_NE(text.find(flag), std::string::npos) << sub << " " << flag;
    }
    EXPECT_NE(text.find("42"), std::string::npos) << sub << ": seed default";
  }
  const std::string train = run({"train", "--help"}).out;
  for (const char* flag : {"--batch-size", "--epochs", "--warmup", "--triplets", "--resume"}) {
    EXPECT_NE(train.find(flag), std::string::npos) << flag;
  }
  EXPECT_NE(train.find("5e-05"), std::string::npos) << train;
}

TEST(Cli, EmbedWritesOneArrayPerLine) {
  const fs::path dir = testing::scratch_dir("cli_embed");
  std::ofstream(dir / "in.txt") << "a dog runs\nthe cat sleeps\n";
  const Result r = run({"embed", "--input", (dir / "in.txt").string(), "--prompt", "prompt1",
                        "--out", dir.string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  std::ifstream in(dir / "embeddings.jsonl");
  int lines = 0;
  for (std::string line; std::getline(in, line); ++lines) {
    const auto j = nlohmann::json::parse(line);
    ASSERT_TRUE(j.is_array());
    EXPECT_EQ(j.size(), 64u);
  }
  EXPECT_EQ(lines, 2);
}

TEST(Cli, EvalAndCurveAfterTraining) {
  const fs::path dir = testing::scratch_dir("cli_curve");
  ASSERT_EQ(run({"train", "--triplets", kTriplets, "--batch-size", "100", "--epochs", "2",
                 "--out", dir.string()})
                .code,
            cli::kExitOk);
  const Result e = run({"eval", "--sts", kSts, "--checkpoint",
                        (dir / checkpoint_filename(4)).string(), "--out",
                        (dir / "eval").string()});
  ASSERT_EQ(e.code, cli::kExitOk) << e.err;
  EXPECT_NE(e.out.find("overall\t"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "eval" / "report.csv"));

  const Result c = run({"curve", "--sts", kSts, "--checkpoints", dir.string(), "--out",
                        (dir / "curve").string()});
  ASSERT_EQ(c.code, cli::kExitOk) << c.err;
  EXPECT_NE(c.out.find("converged_at"), std::string::npos);
  const std::string csv = testing::read_file(dir / "curve" / "curve.csv");
  EXPECT_EQ(csv.rfind("step,overall\n0,", 0), 0u) << csv;
}

}  // namespace
}  // namespace embedlab
