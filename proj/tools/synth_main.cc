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

// Writes the seeded synthetic NLI triplets and STS pairs used by the bundled
// data/ directory and the acceptance suite.

#include <cstdint>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "embedlab/dataset.h"
#include "embedlab/synthetic.h"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic clustered corpus", "embedlab-synth"};
  app.option_defaults()->always_capture_default();
  std::uint64_t seed = 1;
  int clusters = 4;
  int per_cluster = 50;
  std::string out = "data";
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("--clusters", clusters, "Number of topic clusters");
  app.add_option("--per-cluster", per_cluster, "Triplets and STS pairs per cluster");
  app.add_option("--out", out, "Output directory");
  CLI11_PARSE(app, argc, argv);

  try {
    const embedlab::SyntheticCorpus corpus =
        embedlab::synthetic_corpus(seed, clusters, per_cluster);
    const std::filesystem::path dir = out;
    std::filesystem::create_directories(dir);
    embedlab::save_triplets(dir / "synthetic_triplets.jsonl", corpus.triplets);
    embedlab::save_sts(dir / "synthetic_sts.jsonl", corpus.sts);
    std::cout << corpus.triplets.size() << " triplets, " << corpus.sts.size()
              << " STS pairs written to " << dir.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
