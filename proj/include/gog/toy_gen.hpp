#pragma once

#include <cstdint>

#include "gog/corpus.hpp"

namespace gog {

struct ToyGenConfig {
  std::uint64_t seed = 7;
  int n_dialogs = 1;
  int turns = 3;
  int n_regions = 5;
  int d_v = 16;
  std::string id_prefix = "toy";
};

/// Generated corpus plus the generator's ground truth: for each dialog, the
/// entity id behind each emitted coreference chain (test hook).
struct ToyCorpus {
  Corpus corpus;
  std::vector<std::vector<int>> chain_entities;
};

/// Template-grammar dialogs over a small entity/color vocabulary. Questions
/// re-mention earlier entities (directly or via "it"), so coreference chains
/// and per-template dependency parses are correct by construction. Region
/// features are entity+color prototype vectors plus seeded noise, which makes
/// every question answerable from the features alone.
ToyCorpus generate_toy_corpus(const ToyGenConfig& cfg);

}  // namespace gog
