#include "gog/pipeline.hpp"

#include <algorithm>

#include "gog/error.hpp"

namespace gog {

RoundContext prepare_round(const AnnotatedDialog& ad, int round_index, const Vocabulary& vocab,
                           const TrainConfig& cfg) {
  RoundContext ctx;
  ctx.dialog = &ad;
  ctx.round_index = round_index;
  const DialogRound& round = ad.dialog.rounds[round_index];

  ctx.lambda = std::min<int>(static_cast<int>(round.question.size()), cfg.max_question_len);
  ctx.q_valid = ctx.lambda;
  ctx.graphs = build_round_graphs(ad, round_index, ctx.lambda, ctx.q_valid, cfg);

  ctx.answer_ids = vocab.encode(round.answer);
  if (static_cast<int>(ctx.answer_ids.size()) > cfg.max_answer_len) {
    ctx.answer_ids.resize(cfg.max_answer_len);
  }
  ctx.gt_index = round.gt_index;
  for (const auto& cand : round.candidates) {
    TokenIds ids = vocab.encode(cand);
    if (static_cast<int>(ids.size()) > cfg.max_answer_len) {
      ids.resize(cfg.max_answer_len);
      ++ctx.truncated_candidates;
    }
    ctx.candidate_ids.push_back(std::move(ids));
  }
  return ctx;
}

ForwardOutput forward_round(const RoundContext& ctx, const Vocabulary& vocab, ParamStore& store,
                            const TrainConfig& cfg) {
  ForwardOutput out;
  EncodedDialog enc = encode_features(*ctx.dialog, ctx.round_index, vocab, store, cfg);
  out.state = run_gog(enc, ctx.graphs, cfg.ablations, cfg.heads, store);
  out.fusion = fuse(out.state, cfg.heads, store);
  return out;
}

RoundLosses round_loss(const RoundContext& ctx, const Vocabulary& vocab, ParamStore& store,
                       const TrainConfig& cfg, AnswerEncoderCache* cache) {
  ForwardOutput fwd = forward_round(ctx, vocab, store, cfg);
  RoundLosses losses;
  switch (cfg.decoder_mode) {
    case DecoderMode::Disc: {
      if (ctx.candidate_ids.empty()) throw ValidationError("round has no candidate list");
      losses.total = discriminative_loss(fwd.fusion.joint, ctx.candidate_ids, ctx.gt_index, store, cache);
      losses.part_d = losses.total.scalar();
      break;
    }
    case DecoderMode::Gen: {
      losses.total = generative_loss(fwd.fusion.joint, ctx.answer_ids, store);
      losses.part_g = losses.total.scalar();
      break;
    }
    case DecoderMode::Multi: {
      if (ctx.candidate_ids.empty()) throw ValidationError("round has no candidate list");
      Tensor ld = discriminative_loss(fwd.fusion.joint, ctx.candidate_ids, ctx.gt_index, store, cache);
      Tensor lg = generative_loss(fwd.fusion.joint, ctx.answer_ids, store);
      losses.part_d = ld.scalar();
      losses.part_g = lg.scalar();
      losses.total = multitask_loss(ld, lg);
      break;
    }
  }
  return losses;
}

}  // namespace gog
