#pragma once

#include <string>
#include <vector>

#include "gog/config.hpp"
#include "gog/corpus.hpp"
#include "gog/graph.hpp"
#include "gog/graph_attention.hpp"
#include "gog/lstm.hpp"
#include "gog/param_store.hpp"

namespace gog {

struct ModelDims {
  int hidden = 64;
  int embed = 64;
  int heads = 4;
  int vocab_size = 0;
  int d_v = 0;
};

/// Creates every parameter of the encoder, fusion and both decoders. The set
/// is independent of ablation flags (unused paths simply receive no gradient),
/// so one store serves all configurations of the same dims.
void register_model_params(ParamStore& store, const ModelDims& dims);

struct EncodedDialog {
  Tensor v;  // regions projected to the model width
  Tensor q;  // per-token question states
  Tensor h;  // one row per history turn (last LSTM state each)
  int q_valid = 0;
  int mu = 0, lambda = 0, t = 0;
};

/// Token embeddings -> LSTM for the question and each history turn (caption,
/// then concatenated QA pairs), plus a linear projection of region features.
/// history_len = number of turns to include (caption counts as one).
EncodedDialog encode_features(const AnnotatedDialog& ad, int round_index, const Vocabulary& vocab,
                              ParamStore& store, const TrainConfig& cfg, bool pad_question = false);

struct GogGraphs {
  RelationGraph history;
  RelationGraph question;
  RelationGraph image;
};

/// Builds the three relation graphs for a round, honoring the relation
/// ablations (fully-connected unlabeled replacements).
GogGraphs build_round_graphs(const AnnotatedDialog& ad, int round_index, int lambda, int q_valid,
                             const TrainConfig& cfg);

struct GoGState {
  EncodedDialog enc;
  Tensor h_star, q_star, v_star;
  Tensor q_prime, v_prime;
  Tensor h_hat, q_hat;          // pooled vectors (left undefined when the
  Tensor hist_pool, ques_pool;  // corresponding aware step is ablated)
  GraphAttOutput h_att, q_att, v_att;
};

Tensor history_graph_step(const Tensor& h, const RelationGraph& a, int heads, ParamStore& store,
                          GraphAttOutput* att = nullptr);

/// Attention-pools h_star into h_hat, concatenates it onto every question
/// token, projects back to the model width, and runs graph attention over B.
void history_aware_question_step(GoGState& s, const RelationGraph& b, const AblationSet& ab,
                                 int heads, ParamStore& store);

void question_aware_image_step(GoGState& s, const RelationGraph& d, const AblationSet& ab,
                               int heads, ParamStore& store);

/// The fixed H -> Q -> I chain with ablation support.
GoGState run_gog(const EncodedDialog& enc, const GogGraphs& graphs, const AblationSet& ab, int heads,
                 ParamStore& store);

}  // namespace gog
