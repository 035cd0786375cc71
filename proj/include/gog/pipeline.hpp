#pragma once

#include <string>
#include <vector>

#include "gog/config.hpp"
#include "gog/corpus.hpp"
#include "gog/decoders.hpp"
#include "gog/encoder.hpp"
#include "gog/fusion.hpp"

namespace gog {

/// Everything about one (dialog, round) pair that does not depend on
/// parameters: token ids, graphs and candidate lists. Reused across epochs.
struct RoundContext {
  const AnnotatedDialog* dialog = nullptr;
  int round_index = 0;
  GogGraphs graphs;
  std::vector<TokenIds> candidate_ids;  // truncated to max_answer_len
  TokenIds answer_ids;
  int gt_index = -1;
  int truncated_candidates = 0;
  int lambda = 0;
  int q_valid = 0;
};

RoundContext prepare_round(const AnnotatedDialog& ad, int round_index, const Vocabulary& vocab,
                           const TrainConfig& cfg);

struct ForwardOutput {
  GoGState state;
  FusionOutput fusion;
};

/// Full encoder: features -> three graph-attention steps -> fusion.
ForwardOutput forward_round(const RoundContext& ctx, const Vocabulary& vocab, ParamStore& store,
                            const TrainConfig& cfg);

struct RoundLosses {
  Tensor total;
  double part_d = 0.0;  // value of the discriminative part (0 when disabled)
  double part_g = 0.0;
};

/// Loss for one round under the configured decoder mode.
RoundLosses round_loss(const RoundContext& ctx, const Vocabulary& vocab, ParamStore& store,
                       const TrainConfig& cfg, AnswerEncoderCache* cache);

}  // namespace gog
