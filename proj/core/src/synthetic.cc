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

#include "embedlab/synthetic.h"

#include <algorithm>
#include <array>
#include <set>
#include <sstream>
#include <stdexcept>

#include "embedlab/rng.h"

namespace embedlab {
namespace {

constexpr int kSlots = 3;
constexpr int kWordsPerSlot = 6;
constexpr int kLettersPerCluster = 6;
constexpr int kMinWordLength = 3;
constexpr int kMaxWordLength = 8;

using Lexicon = std::vector<std::array<std::vector<std::string>, kSlots>>;

Lexicon make_lexicon(int n_clusters, Rng& rng) {
  Lexicon lexicon(n_clusters);
  std::set<std::string> used = {"the"};
  for (int c = 0; c < n_clusters; ++c) {
    const int first_letter = (c * kLettersPerCluster) % 26;
    for (int slot = 0; slot < kSlots; ++slot) {
      while (static_cast<int>(lexicon[c][slot].size()) < kWordsPerSlot) {
        const int length = kMinWordLength + static_cast<int>(rng.index(
                                                kMaxWordLength - kMinWordLength + 1));
        std::string word;
        for (int i = 0; i < length; ++i) {
          const int letter =
              (first_letter + static_cast<int>(rng.index(kLettersPerCluster))) % 26;
          word.push_back(static_cast<char>('a' + letter));
        }
        if (used.insert(word).second) lexicon[c][slot].push_back(word);
      }
    }
  }
  return lexicon;
}

std::string sentence(const std::array<std::string, kSlots>& words) {
  return "the " + words[0] + " " + words[1] + " the " + words[2];
}

std::string pure_sentence(const Lexicon& lexicon, int cluster, Rng& rng) {
  std::array<std::string, kSlots> words;
  for (int slot = 0; slot < kSlots; ++slot) {
    words[slot] = lexicon[cluster][slot][rng.index(kWordsPerSlot)];
  }
  return sentence(words);
}

int other_cluster(int cluster, int n_clusters, Rng& rng) {
  const int offset = 1 + static_cast<int>(rng.index(n_clusters - 1));
  return (cluster + offset) % n_clusters;
}

}  // namespace

std::vector<double> SyntheticCorpus::cluster_profile(
    const std::string& sentence) const {
  std::vector<double> profile(n_clusters, 0.0);
  std::istringstream words(sentence);
  std::string word;
  while (words >> word) {
    auto it = word_cluster.find(word);
    if (it != word_cluster.end()) profile[it->second] += 1.0;
  }
  return profile;
}

double SyntheticCorpus::gold_score(const std::string& a,
                                   const std::string& b) const {
  const std::vector<double> pa = cluster_profile(a);
  const std::vector<double> pb = cluster_profile(b);
  double shared = 0.0, words_a = 0.0, words_b = 0.0;
  for (int c = 0; c < n_clusters; ++c) {
    shared += std::min(pa[c], pb[c]);
    words_a += pa[c];
    words_b += pb[c];
  }
  const double words = std::max(words_a, words_b);
  return words == 0.0 ? 0.0 : 5.0 * shared / words;
}

SyntheticCorpus synthetic_corpus(std::uint64_t seed, int n_clusters,
                                 int triplets_per_cluster) {
  if (n_clusters < 2) {
    throw std::invalid_argument("synthetic corpus: n_clusters must be >= 2");
  }
  if (triplets_per_cluster < 1) {
    throw std::invalid_argument(
        "synthetic corpus: triplets_per_cluster must be >= 1");
  }
  Rng rng(seed);
  const Lexicon lexicon = make_lexicon(n_clusters, rng);

  SyntheticCorpus corpus;
  corpus.n_clusters = n_clusters;
  for (int c = 0; c < n_clusters; ++c) {
    for (const auto& pool : lexicon[c]) {
      for (const std::string& w : pool) corpus.word_cluster[w] = c;
    }
  }

  for (int c = 0; c < n_clusters; ++c) {
    for (int i = 0; i < triplets_per_cluster; ++i) {
      const int neg = other_cluster(c, n_clusters, rng);
      std::string premise = pure_sentence(lexicon, c, rng);
      std::string entailment = pure_sentence(lexicon, c, rng);
      std::string contradiction = pure_sentence(lexicon, neg, rng);
      corpus.triplets.push_back(
          {std::move(premise), std::move(entailment), std::move(contradiction)});
      corpus.triplet_premise_cluster.push_back(c);
      corpus.triplet_contradiction_cluster.push_back(neg);
    }
  }

  for (int c = 0; c < n_clusters; ++c) {
    for (int i = 0; i < triplets_per_cluster; ++i) {
      const int b = other_cluster(c, n_clusters, rng);
      const int shared = static_cast<int>(rng.index(kSlots + 1));
      // Slots [0, shared) of a random rotation come from cluster c.
      const int rotation = static_cast<int>(rng.index(kSlots));
      std::array<std::string, kSlots> words;
      for (int k = 0; k < kSlots; ++k) {
        const int slot = (rotation + k) % kSlots;
        const int owner = k < shared ? c : b;
        words[slot] = lexicon[owner][slot][rng.index(kWordsPerSlot)];
      }
      corpus.sts.push_back({pure_sentence(lexicon, c, rng), sentence(words),
                            5.0 * shared / kSlots});
    }
  }
  return corpus;
}

}  // namespace embedlab
