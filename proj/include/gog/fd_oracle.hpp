#pragma once

#include "gog/pipeline.hpp"

namespace gog {

/// Independent long-double transcription of the full round loss (encoder,
/// three graph attentions, fusion, both decoders). Shares no code with the
/// tape-based implementation; used as the finite-difference reference where
/// plain double differences cannot resolve weakly coupled parameters
/// (the quantization floor of a loss L is ulp(L)/2eps).
long double oracle_round_loss(const RoundContext& ctx, const Vocabulary& vocab,
                              const ParamStore& store, const TrainConfig& cfg);

struct OracleGradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  double forward_gap = 0.0;  // |oracle loss - production loss| at the base point
};

/// Central finite differences of the oracle against the production backward
/// pass, every trainable scalar, |a-n| / max(1e-8, |a|+|n|) normalization.
OracleGradCheckResult oracle_check_gradients(const RoundContext& ctx, const Vocabulary& vocab,
                                             ParamStore& store, const TrainConfig& cfg,
                                             double epsilon = 1e-5);

}  // namespace gog
