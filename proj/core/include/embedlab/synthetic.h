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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "embedlab/dataset.h"

namespace embedlab {

// Cluster-templated stand-in for NLI triplets and STS pairs.
//
// Every cluster owns pools of pseudo-words for three content slots, spelled
// from a cluster-specific letter range. A sentence fills the frame
// "the <subject> <verb> the <object>". Premise and entailment are drawn from
// the same cluster, the contradiction from a different one. Each STS pair
// holds a pure sentence of cluster a and a sentence taking k of its three
// slots from a and the rest from another cluster b; gold = 5k/3.
struct SyntheticCorpus {
  int n_clusters = 0;
  std::vector<TripletRecord> triplets;
  std::vector<int> triplet_premise_cluster;
  std::vector<int> triplet_contradiction_cluster;
  std::vector<StsRecord> sts;
  // Content word -> owning cluster.
  std::map<std::string, int> word_cluster;

  // Histogram of content-word clusters in a sentence (length n_clusters).
  std::vector<double> cluster_profile(const std::string& sentence) const;

  // 5 * sum_c min(profile_a[c], profile_b[c]) / max(words_a, words_b): the
  // rule the generated STS labels follow. 0 when neither has content words.
  double gold_score(const std::string& a, const std::string& b) const;
};

// Throws std::invalid_argument when n_clusters < 2 or
// triplets_per_cluster < 1.
SyntheticCorpus synthetic_corpus(std::uint64_t seed, int n_clusters,
                                 int triplets_per_cluster);

}  // namespace embedlab
