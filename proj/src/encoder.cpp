#include "gog/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "gog/error.hpp"
#include "gog/ops.hpp"

namespace gog {

namespace {

std::vector<int> truncate_ids(std::vector<int> ids, int max_len) {
  if (static_cast<int>(ids.size()) > max_len) ids.resize(max_len);
  return ids;
}

// two-layer attention pooling: softmax(W1 tanh(W2 x)) over rows of x
Tensor pool_weights(const Tensor& x, const std::string& prefix, ParamStore& store,
                    const std::vector<std::uint8_t>& mask) {
  Tensor logits = linear(tanh_op(linear(x, prefix + ".W2", store)), prefix + ".W1", store);
  return masked_softmax(transpose(logits), mask);  // 1 x rows
}

std::vector<std::uint8_t> valid_mask(int n, int valid) {
  std::vector<std::uint8_t> mask(n, 0);
  std::fill(mask.begin(), mask.begin() + valid, 1);
  return mask;
}

}  // namespace

void register_model_params(ParamStore& store, const ModelDims& dims) {
  if (dims.vocab_size < 4) throw ConfigError("register_model_params: vocabulary not built");
  if (dims.d_v < 1) throw ConfigError("register_model_params: region feature width unknown");
  const int d = dims.hidden;

  store.create("embed.table", dims.vocab_size, dims.embed);
  register_lstm_params(store, "enc.lstm", dims.embed, d);
  store.create("enc.vproj.W", dims.d_v, d);
  store.create("enc.vproj.b", 1, d, Init::Zeros);

  register_graph_att_params(store, "hgat", d, dims.heads, kNumHistoryLabels);
  register_graph_att_params(store, "qgat", d, dims.heads, kNumQuestionLabels);
  register_graph_att_params(store, "igat", d, dims.heads, kNumImageLabels);

  store.create("hpool.W2", d, d);
  store.create("hpool.W1", d, 1);
  store.create("qinject.W", 2 * d, d);
  store.create("qinject.b", 1, d, Init::Zeros);
  store.create("qpool.W2", d, d);
  store.create("qpool.W1", d, 1);
  store.create("vinject.W", 2 * d, d);
  store.create("vinject.b", 1, d, Init::Zeros);

  const int d_k = d / dims.heads;
  const char* modalities[3] = {"v", "q", "h"};
  for (const char* m : modalities) {
    for (const char* s : modalities) {
      const std::string prefix = std::string("fuse.") + m + ".att_" + s;
      for (int h = 0; h < dims.heads; ++h) {
        const std::string hp = prefix + ".head" + std::to_string(h);
        store.create(hp + ".Wq", d, d_k);
        store.create(hp + ".Wk", d, d_k);
        store.create(hp + ".Wv", d, d_k);
      }
      store.create(prefix + ".Wo", d, d);
    }
    const std::string mp = std::string("fuse.") + m;
    store.create(mp + ".Wcat", 3 * d, d);
    store.create(mp + ".ln.gain", 1, d, Init::Ones);
    store.create(mp + ".ln.shift", 1, d, Init::Zeros);
    store.create(mp + ".pool.W2", d, d);
    store.create(mp + ".pool.W1", d, 1);
  }
  store.create("fuse.WJ", 3 * d, d);

  store.create("gen.init1.W", d, d);
  store.create("gen.init1.b", 1, d, Init::Zeros);
  store.create("gen.init2.W", d, d);
  store.create("gen.init2.b", 1, d, Init::Zeros);
  register_lstm_params(store, "gen.lstm1", dims.embed, d);
  register_lstm_params(store, "gen.lstm2", d, d);
  store.create("gen.out.W", d, dims.vocab_size);
  store.create("gen.out.b", 1, dims.vocab_size, Init::Zeros);

  register_lstm_params(store, "disc.lstm", dims.embed, d);
}

EncodedDialog encode_features(const AnnotatedDialog& ad, int round_index, const Vocabulary& vocab,
                              ParamStore& store, const TrainConfig& cfg, bool pad_question) {
  const DialogInstance& dialog = ad.dialog;
  if (round_index < 0 || round_index >= static_cast<int>(dialog.rounds.size())) {
    throw ValidationError("encode_features: round " + std::to_string(round_index) + " out of range");
  }
  const Tensor& table = store.get("embed.table");

  std::vector<int> q_ids = truncate_ids(vocab.encode(dialog.rounds[round_index].question),
                                        cfg.max_question_len);
  int q_valid = static_cast<int>(q_ids.size());
  if (pad_question) {
    auto [padded, valid] = pad_or_truncate(q_ids, cfg.max_question_len);
    q_ids = std::move(padded);
    q_valid = valid;
  }
  if (q_valid == 0) throw ValidationError("encode_features: question has no valid tokens");

  EncodedDialog enc;
  enc.q = lstm_encode(embedding_lookup(table, q_ids), store, "enc.lstm", q_valid).per_step;
  enc.q_valid = q_valid;
  enc.lambda = enc.q.rows;

  std::vector<Tensor> turn_states;
  for (int turn = 0; turn <= round_index; ++turn) {
    std::vector<int> ids;
    if (turn == 0) {
      ids = truncate_ids(vocab.encode(dialog.caption), cfg.max_caption_len);
    } else {
      const DialogRound& prev = dialog.rounds[turn - 1];
      ids = truncate_ids(vocab.encode(prev.question), cfg.max_question_len);
      const auto ans = truncate_ids(vocab.encode(prev.answer), cfg.max_answer_len);
      ids.insert(ids.end(), ans.begin(), ans.end());
    }
    if (ids.empty()) throw ValidationError("encode_features: empty history turn " + std::to_string(turn));
    turn_states.push_back(lstm_encode(embedding_lookup(table, ids), store, "enc.lstm").last.hidden);
  }
  enc.h = concat_rows(turn_states);
  enc.t = enc.h.rows;

  if (dialog.regions.empty()) throw ValidationError("encode_features: dialog has no regions");
  const int d_v = static_cast<int>(dialog.regions[0].feature.size());
  Tensor features = zeros(static_cast<int>(dialog.regions.size()), d_v);
  for (std::size_t i = 0; i < dialog.regions.size(); ++i) {
    for (int k = 0; k < d_v; ++k) features.mut(static_cast<int>(i), k) = dialog.regions[i].feature[k];
  }
  check_finite(features, "region features");
  enc.v = linear(features, "enc.vproj.W", "enc.vproj.b", store);
  enc.mu = enc.v.rows;
  return enc;
}

GogGraphs build_round_graphs(const AnnotatedDialog& ad, int round_index, int lambda, int q_valid,
                             const TrainConfig& cfg) {
  GogGraphs graphs;
  const int t = round_index + 1;
  if (cfg.ablations.coreference_relation) {
    graphs.history = make_fully_connected(t);
  } else {
    graphs.history = build_history_graph(restrict_chains(ad.coref, t), t);
  }
  if (cfg.ablations.dependency_relation) {
    graphs.question = make_fully_connected(lambda, q_valid);
  } else {
    graphs.question = build_question_graph(ad.deps[round_index], lambda, q_valid);
  }
  std::vector<Bbox> boxes;
  boxes.reserve(ad.dialog.regions.size());
  for (const Region& r : ad.dialog.regions) boxes.push_back(r.bbox);
  if (cfg.ablations.spatial_relation) {
    graphs.image = make_fully_connected(static_cast<int>(boxes.size()));
    graphs.image.directed = true;
  } else {
    SpatialThresholds th{cfg.iou_threshold, cfg.distance_threshold,
                         std::hypot(ad.dialog.image_w, ad.dialog.image_h)};
    graphs.image = build_image_graph(boxes, th);
  }
  return graphs;
}

Tensor history_graph_step(const Tensor& h, const RelationGraph& a, int heads, ParamStore& store,
                          GraphAttOutput* att) {
  GraphAttOutput out = graph_att(h, a, "hgat", heads, store);
  if (att) *att = out;
  return out.node_states;
}

void history_aware_question_step(GoGState& s, const RelationGraph& b, const AblationSet& ab,
                                 int heads, ParamStore& store) {
  if (ab.h_aware) {
    s.q_prime = s.enc.q;
  } else {
    s.hist_pool = pool_weights(s.h_star, "hpool", store, valid_mask(s.h_star.rows, s.h_star.rows));
    s.h_hat = matmul(s.hist_pool, s.h_star);
    Tensor injected = concat_cols(s.enc.q, repeat_rows(s.h_hat, s.enc.q.rows));
    s.q_prime = linear(injected, "qinject.W", "qinject.b", store);
  }
  if (ab.q_graph) {
    s.q_star = s.q_prime;
  } else {
    s.q_att = graph_att(s.q_prime, b, "qgat", heads, store);
    s.q_star = s.q_att.node_states;
  }
}

void question_aware_image_step(GoGState& s, const RelationGraph& d, const AblationSet& ab,
                               int heads, ParamStore& store) {
  if (ab.q_aware) {
    s.v_prime = s.enc.v;
  } else {
    s.ques_pool = pool_weights(s.q_star, "qpool", store, valid_mask(s.q_star.rows, s.enc.q_valid));
    s.q_hat = matmul(s.ques_pool, s.q_star);
    Tensor injected = concat_cols(s.enc.v, repeat_rows(s.q_hat, s.enc.v.rows));
    s.v_prime = linear(injected, "vinject.W", "vinject.b", store);
  }
  if (ab.i_graph) {
    s.v_star = s.v_prime;
  } else {
    s.v_att = graph_att(s.v_prime, d, "igat", heads, store);
    s.v_star = s.v_att.node_states;
  }
}

GoGState run_gog(const EncodedDialog& enc, const GogGraphs& graphs, const AblationSet& ab, int heads,
                 ParamStore& store) {
  GoGState s;
  s.enc = enc;
  if (ab.h_graph) {
    s.h_star = enc.h;
  } else {
    s.h_star = history_graph_step(enc.h, graphs.history, heads, store, &s.h_att);
  }
  history_aware_question_step(s, graphs.question, ab, heads, store);
  question_aware_image_step(s, graphs.image, ab, heads, store);
  return s;
}

}  // namespace gog
