#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gog/param_store.hpp"

namespace gog {

/// Everything a run needs to resume or evaluate: parameters, the vocabulary,
/// the config snapshot with its digest, and (optionally) optimizer moments.
/// Values are stored as little-endian 64-bit floats; round-trips are bit-exact.
struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint64_t config_digest = 0;
  std::uint64_t epoch = 0;
  std::string config_text;
  std::vector<std::string> vocab_tokens;
  bool has_optimizer = false;
  std::uint64_t adam_step = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> adam_moments;
};

void save_checkpoint(const std::string& path, const ParamStore& store, const CheckpointMeta& meta);

/// Loads parameters into a fresh store (returned) and fills `meta`.
ParamStore load_checkpoint(const std::string& path, CheckpointMeta& meta);

}  // namespace gog
