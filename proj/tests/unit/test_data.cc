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
#include <set>
#include <string>

#include "embedlab/dataset.h"
#include "embedlab/errors.h"
#include "embedlab/synthetic.h"
#include "embedlab/tokenizer.h"
#include "oracles.h"

namespace embedlab {
namespace {

std::filesystem::path write_text(const std::string& dir, const std::string& name,
                                 const std::string& body) {
  const auto path = testing::scratch_dir(dir) / name;
  std::ofstream(path, std::ios::binary) << body;
  return path;
}

TEST(Tokenizer, PrepareAppendsEos) {
  const ByteTokenizer tok;
  const PreparedInput p = tok.prepare("hi");
  EXPECT_EQ(p.ids, (std::vector<int>{'h', 'i', 257}));
  EXPECT_EQ(p.eos_position, 2u);
  EXPECT_FALSE(p.truncated);
}

TEST(Tokenizer, PromptTemplatesWrapTheSentence) {
  const ByteTokenizer tok;
  const PreparedInput p = tok.prepare("Dogs bark", PromptTemplate::named("prompt1"));
  std::vector<int> expected;
  for (char c : std::string("This sentence: Dogs bark means in one word: ")) {
    expected.push_back(static_cast<unsigned char>(c));
  }
  expected.push_back(257);
  EXPECT_EQ(p.ids, expected);
  EXPECT_EQ(PromptTemplate::named("prompt2").apply("x"), "This sentence x means: ");
  EXPECT_EQ(PromptTemplate::named("prompt3").apply("x"), "x is: ");
  EXPECT_EQ(PromptTemplate::named("none").apply("x"), "x");
  EXPECT_THROW(PromptTemplate::named("prompt4"), std::invalid_argument);
  EXPECT_THROW(PromptTemplate("bad", "no placeholder"), std::invalid_argument);
}

TEST(Tokenizer, TruncationKeepsPrefixAndEos) {
  const ByteTokenizer tok(64);
  const std::string text(1000, 'q');
  const PreparedInput p = tok.prepare(text);
  EXPECT_EQ(p.ids.size(), 64u);
  EXPECT_EQ(p.ids.back(), 257);
  EXPECT_EQ(p.eos_position, 63u);
  EXPECT_TRUE(p.truncated);
  EXPECT_EQ(tok.decode(p.ids), std::string(63, 'q'));
}

TEST(Tokenizer, BatchIsRightPadded) {
  const ByteTokenizer tok;
  const std::vector<std::string> texts = {"abc", "a"};
  const TokenBatch b = tok.make_batch(texts);
  EXPECT_EQ(b.length, 4u);
  EXPECT_EQ(b.eos_positions, (std::vector<std::size_t>{3, 1}));
  EXPECT_EQ(b.tokens[4 + 2], 256);
  EXPECT_EQ(b.is_pad, (std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 1, 1}));
}

TEST(Tokenizer, DecodeInvertsEncode) {
  const ByteTokenizer tok;
  const std::string s = "mixed \xc3\xa9 bytes\t!";
  EXPECT_EQ(tok.decode(tok.prepare(s).ids), s);
}

TEST(Loaders, TripletLine) {
  const auto path = write_text(
      "triplet_line", "t.jsonl",
      "{\"premise\":\"a\",\"entailment\":\"b\",\"contradiction\":\"c\"}\n\n");
  EXPECT_EQ(load_triplets(path), (std::vector<TripletRecord>{{"a", "b", "c"}}));
}

TEST(Loaders, MissingKeyNamesLine) {
  const auto path = write_text(
      "triplet_missing", "t.jsonl",
      "{\"premise\":\"a\",\"entailment\":\"b\",\"contradiction\":\"c\"}\n"
      "{\"premise\":\"a\",\"entailment\":\"b\"}\n");
  try {
    load_triplets(path);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("contradiction"), std::string::npos);
  }
}

TEST(Loaders, StsJsonAndTsv) {
  const auto json = write_text("sts_json", "s.jsonl",
                               "{\"sentence1\":\"x\",\"sentence2\":\"y\",\"score\":3.5}\n");
  EXPECT_EQ(load_sts(json), (std::vector<StsRecord>{{"x", "y", 3.5}}));
  const auto tsv = write_text("sts_tsv", "s.tsv", "x\ty\t4.2\r\nu\tv\t0\n");
  EXPECT_EQ(load_sts(tsv), (std::vector<StsRecord>{{"x", "y", 4.2}, {"u", "v", 0.0}}));
}

TEST(Loaders, StsErrors) {
  const auto mixed = write_text(
      "sts_mixed", "s.txt",
      "{\"sentence1\":\"x\",\"sentence2\":\"y\",\"score\":1}\nx\ty\t2\n");
  try {
    load_sts(mixed);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  const auto range = write_text("sts_range", "s.tsv", "x\ty\t5.5\n");
  EXPECT_THROW(load_sts(range), DataError);
  const auto cols = write_text("sts_cols", "s.tsv", "x\ty\n");
  EXPECT_THROW(load_sts(cols), DataError);
  const auto nan = write_text("sts_nan", "s.tsv", "x\ty\tabc\n");
  EXPECT_THROW(load_sts(nan), DataError);
  EXPECT_THROW(load_sts("/nonexistent/embedlab.tsv"), std::runtime_error);
}

TEST(Loaders, SaveLoadRoundTrip) {
  const SyntheticCorpus c = synthetic_corpus(3, 3, 5);
  const auto dir = testing::scratch_dir("roundtrip");
  save_triplets(dir / "t.jsonl", c.triplets);
  save_sts(dir / "s.jsonl", c.sts);
  EXPECT_EQ(load_triplets(dir / "t.jsonl"), c.triplets);
  EXPECT_EQ(load_sts(dir / "s.jsonl"), c.sts);
}

TEST(Batching, PartialFinalBatchIsKept) {
  const auto plan = plan_batches(275, 60, 1);
  ASSERT_EQ(plan.size(), 5u);
  std::vector<std::size_t> sizes;
  std::set<std::size_t> seen;
  for (const auto& b : plan) {
    sizes.push_back(b.size());
    seen.insert(b.begin(), b.end());
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{60, 60, 60, 60, 35}));
  EXPECT_EQ(seen.size(), 275u);
  EXPECT_EQ(*seen.rbegin(), 274u);
}

TEST(Batching, SeedDeterminesOrder) {
  EXPECT_EQ(plan_batches(100, 7, 42), plan_batches(100, 7, 42));
  EXPECT_NE(plan_batches(100, 7, 42), plan_batches(100, 7, 43));
  EXPECT_THROW(plan_batches(0, 7, 1), std::invalid_argument);
  EXPECT_THROW(plan_batches(10, 0, 1), std::invalid_argument);
}

TEST(Batching, IteratorYieldsTokenizedPlan) {
  const SyntheticCorpus c = synthetic_corpus(1, 4, 10);
  const ByteTokenizer tok;
  BatchIterator it(c.triplets, 12, 5, tok);
  const auto plan = plan_batches(c.triplets.size(), 12, 5);
  EXPECT_EQ(it.num_batches(), plan.size());
  for (const auto& expected : plan) {
    auto batch = it.next();
    ASSERT_TRUE(batch.has_value());
    EXPECT_EQ(batch->indices, expected);
    EXPECT_EQ(batch->tokens.premises.batch, expected.size());
    EXPECT_EQ(batch->records.front(), c.triplets[expected.front()]);
  }
  EXPECT_FALSE(it.next().has_value());
}

TEST(Synthetic, ContradictionsComeFromAnotherCluster) {
  const SyntheticCorpus c = synthetic_corpus(1, 4, 50);
  ASSERT_EQ(c.triplets.size(), 200u);
  for (std::size_t i = 0; i < c.triplets.size(); ++i) {
    const int premise = c.triplet_premise_cluster[i];
    EXPECT_NE(c.triplet_contradiction_cluster[i], premise);
    const auto pp = c.cluster_profile(c.triplets[i].premise);
    const auto pe = c.cluster_profile(c.triplets[i].entailment);
    EXPECT_EQ(pp[premise], 3.0);
    EXPECT_EQ(pe[premise], 3.0);
  }
}

TEST(Synthetic, GoldFollowsClusterOverlap) {
  const SyntheticCorpus c = synthetic_corpus(2, 4, 20);
  for (const StsRecord& r : c.sts) {
    EXPECT_NEAR(r.gold_score, c.gold_score(r.sentence1, r.sentence2), 1e-12);
    EXPECT_EQ(c.gold_score(r.sentence1, r.sentence1), 5.0);
    EXPECT_GE(r.gold_score, 0.0);
    EXPECT_LE(r.gold_score, 5.0);
  }
  EXPECT_EQ(c.gold_score("the the", "the"), 0.0);
}

TEST(Synthetic, SameSeedSameBytes) {
  const auto d1 = testing::scratch_dir("synth_a");
  const auto d2 = testing::scratch_dir("synth_b");
  save_triplets(d1 / "t.jsonl", synthetic_corpus(9, 4, 25).triplets);
  save_triplets(d2 / "t.jsonl", synthetic_corpus(9, 4, 25).triplets);
  EXPECT_EQ(testing::read_file(d1 / "t.jsonl"), testing::read_file(d2 / "t.jsonl"));
  EXPECT_NE(synthetic_corpus(9, 4, 25).triplets, synthetic_corpus(10, 4, 25).triplets);
  EXPECT_THROW(synthetic_corpus(1, 1, 5), std::invalid_argument);
}

TEST(Synthetic, BundledDataMatchesGenerator) {
  const std::filesystem::path data = std::filesystem::path(EMBEDLAB_SOURCE_DIR) / "data";
  const SyntheticCorpus c = synthetic_corpus(1, 4, 50);
  EXPECT_EQ(load_triplets(data / "synthetic_triplets.jsonl"), c.triplets);
  EXPECT_EQ(load_sts(data / "synthetic_sts.jsonl"), c.sts);
}

}  // namespace
}  // namespace embedlab
