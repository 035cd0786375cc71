#include "gog/fd_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gog/error.hpp"
#include "gog/ops.hpp"

namespace gog {

namespace {

// Plain long-double matrices and straight-line math only. This file must not
// call into the tape ops: it is the reference the tape is checked against.

struct LMat {
  int rows = 0, cols = 0;
  std::vector<long double> v;
  LMat() = default;
  LMat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0L) {}
  long double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  long double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

LMat from_param(const ParamStore& store, const std::string& name) {
  const Tensor& t = store.get(name);
  LMat m(t.rows, t.cols);
  for (std::size_t i = 0; i < t.numel(); ++i) m.v[i] = (*t.data)[i];
  return m;
}

LMat matmul(const LMat& a, const LMat& b) {
  LMat out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const long double aik = a.at(i, k);
      if (aik == 0.0L) continue;
      for (int j = 0; j < b.cols; ++j) out.at(i, j) += aik * b.at(k, j);
    }
  }
  return out;
}

LMat add(const LMat& a, const LMat& b) {
  LMat out = a;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.v[i];
  return out;
}

LMat add_rowvec(const LMat& a, const LMat& bias) {
  LMat out = a;
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) out.at(i, j) += bias.at(0, j);
  }
  return out;
}

LMat relu(const LMat& a) {
  LMat out = a;
  for (auto& x : out.v) x = std::max(0.0L, x);
  return out;
}

LMat tanh_m(const LMat& a) {
  LMat out = a;
  for (auto& x : out.v) x = tanhl(x);
  return out;
}

LMat concat_cols(const LMat& a, const LMat& b) {
  LMat out(a.rows, a.cols + b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) out.at(i, j) = a.at(i, j);
    for (int j = 0; j < b.cols; ++j) out.at(i, a.cols + j) = b.at(i, j);
  }
  return out;
}

LMat row_of(const LMat& a, int r) {
  LMat out(1, a.cols);
  for (int j = 0; j < a.cols; ++j) out.at(0, j) = a.at(r, j);
  return out;
}

void masked_softmax_rows(LMat& scores, const std::vector<std::uint8_t>& mask) {
  for (int i = 0; i < scores.rows; ++i) {
    long double mx = -1e4930L;
    bool any = false;
    for (int j = 0; j < scores.cols; ++j) {
      if (mask[static_cast<std::size_t>(i) * scores.cols + j]) {
        mx = std::max(mx, scores.at(i, j));
        any = true;
      }
    }
    long double z = 0.0L;
    for (int j = 0; j < scores.cols; ++j) {
      if (any && mask[static_cast<std::size_t>(i) * scores.cols + j]) {
        scores.at(i, j) = expl(scores.at(i, j) - mx);
        z += scores.at(i, j);
      } else {
        scores.at(i, j) = 0.0L;
      }
    }
    if (any) {
      for (int j = 0; j < scores.cols; ++j) scores.at(i, j) /= z;
    }
  }
}

LMat layer_norm(const LMat& x, const LMat& gain, const LMat& shift, long double eps) {
  LMat out(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i) {
    long double mu = 0.0L;
    for (int j = 0; j < x.cols; ++j) mu += x.at(i, j);
    mu /= x.cols;
    long double var = 0.0L;
    for (int j = 0; j < x.cols; ++j) var += (x.at(i, j) - mu) * (x.at(i, j) - mu);
    var /= x.cols;
    const long double inv = 1.0L / sqrtl(var + eps);
    for (int j = 0; j < x.cols; ++j) {
      out.at(i, j) = gain.at(0, j) * ((x.at(i, j) - mu) * inv) + shift.at(0, j);
    }
  }
  return out;
}

LMat log_softmax_row(const LMat& x) {
  LMat out = x;
  long double mx = x.v[0];
  for (auto v : x.v) mx = std::max(mx, v);
  long double z = 0.0L;
  for (auto v : x.v) z += expl(v - mx);
  const long double lse = mx + logl(z);
  for (auto& v : out.v) v -= lse;
  return out;
}

long double sigmoid_s(long double x) {
  return x >= 0.0L ? 1.0L / (1.0L + expl(-x)) : expl(x) / (1.0L + expl(x));
}

struct LstmParams {
  LMat W, U, b;
};

LstmParams lstm_params(const ParamStore& store, const std::string& name) {
  return {from_param(store, name + ".W"), from_param(store, name + ".U"),
          from_param(store, name + ".b")};
}

struct LstmStateL {
  std::vector<long double> h, c;
};

void lstm_step(const LMat& x, LstmStateL& s, const LstmParams& p) {
  const int d = static_cast<int>(s.h.size());
  std::vector<long double> z(static_cast<std::size_t>(4) * d, 0.0L);
  for (int j = 0; j < 4 * d; ++j) z[j] = p.b.at(0, j);
  for (int k = 0; k < x.cols; ++k) {
    const long double xv = x.at(0, k);
    if (xv == 0.0L) continue;
    for (int j = 0; j < 4 * d; ++j) z[j] += xv * p.W.at(k, j);
  }
  for (int k = 0; k < d; ++k) {
    const long double hv = s.h[k];
    if (hv == 0.0L) continue;
    for (int j = 0; j < 4 * d; ++j) z[j] += hv * p.U.at(k, j);
  }
  for (int j = 0; j < d; ++j) {
    const long double ig = sigmoid_s(z[j]);
    const long double fg = sigmoid_s(z[d + j]);
    const long double gg = tanhl(z[2 * d + j]);
    const long double og = sigmoid_s(z[3 * d + j]);
    s.c[j] = fg * s.c[j] + ig * gg;
    s.h[j] = og * tanhl(s.c[j]);
  }
}

struct LstmRun {
  LMat per_step;
  LstmStateL last;
};

LstmRun lstm_encode(const LMat& emb, const LstmParams& p, int valid_len, const LstmStateL* init) {
  const int d = p.U.rows;
  if (valid_len < 0 || valid_len > emb.rows) valid_len = emb.rows;
  LstmRun run;
  run.per_step = LMat(emb.rows, d);
  run.last.h.assign(d, 0.0L);
  run.last.c.assign(d, 0.0L);
  if (init) run.last = *init;
  for (int t = 0; t < valid_len; ++t) {
    lstm_step(row_of(emb, t), run.last, p);
    for (int j = 0; j < d; ++j) run.per_step.at(t, j) = run.last.h[j];
  }
  return run;
}

LMat embed_rows(const LMat& table, const std::vector<int>& ids) {
  LMat out(static_cast<int>(ids.size()), table.cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (int j = 0; j < table.cols; ++j) out.at(static_cast<int>(i), j) = table.at(ids[i], j);
  }
  return out;
}

LMat graph_att(const LMat& u, const RelationGraph& g, const ParamStore& store,
               const std::string& prefix, int heads) {
  const LMat wlab = from_param(store, prefix + ".Wlab");
  LMat merged(u.rows, 0);
  std::vector<LMat> messages;
  for (int h = 0; h < heads; ++h) {
    const std::string hp = prefix + ".head" + std::to_string(h);
    LMat left = matmul(u, from_param(store, hp + ".U"));
    LMat right = matmul(u, from_param(store, hp + ".V"));
    LMat scores(u.rows, u.rows);
    const long double scale = 1.0L / sqrtl(static_cast<long double>(left.cols));
    for (int i = 0; i < u.rows; ++i) {
      for (int j = 0; j < u.rows; ++j) {
        long double acc = 0.0L;
        for (int k = 0; k < left.cols; ++k) acc += left.at(i, k) * right.at(j, k);
        scores.at(i, j) = acc * scale;
        if (g.edge(i, j)) scores.at(i, j) += wlab.at(g.label(i, j), 0);
      }
    }
    masked_softmax_rows(scores, g.adjacency);
    messages.push_back(matmul(scores, matmul(u, from_param(store, hp + ".Wu"))));
  }
  LMat cat = messages[0];
  for (int h = 1; h < heads; ++h) cat = concat_cols(cat, messages[h]);
  return relu(add(u, matmul(cat, from_param(store, prefix + ".Wo"))));
}

LMat pool_softmax(const LMat& x, const ParamStore& store, const std::string& prefix,
                  const std::vector<std::uint8_t>& mask) {
  LMat logits = matmul(tanh_m(matmul(x, from_param(store, prefix + ".W2"))),
                       from_param(store, prefix + ".W1"));  // rows x 1
  LMat weights(1, x.rows);
  for (int i = 0; i < x.rows; ++i) weights.at(0, i) = logits.at(i, 0);
  masked_softmax_rows(weights, mask);
  return matmul(weights, x);  // 1 x d
}

LMat cross_attend(const LMat& source, const LMat& target, const std::vector<std::uint8_t>& source_mask,
                  const ParamStore& store, const std::string& prefix, int heads) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(target.rows) * source.rows);
  for (int i = 0; i < target.rows; ++i) {
    std::copy(source_mask.begin(), source_mask.end(),
              mask.begin() + static_cast<std::size_t>(i) * source.rows);
  }
  LMat cat(target.rows, 0);
  std::vector<LMat> parts;
  for (int h = 0; h < heads; ++h) {
    const std::string hp = prefix + ".head" + std::to_string(h);
    LMat queries = matmul(target, from_param(store, hp + ".Wq"));
    LMat keys = matmul(source, from_param(store, hp + ".Wk"));
    LMat values = matmul(source, from_param(store, hp + ".Wv"));
    LMat scores(target.rows, source.rows);
    const long double scale = 1.0L / sqrtl(static_cast<long double>(queries.cols));
    for (int i = 0; i < target.rows; ++i) {
      for (int j = 0; j < source.rows; ++j) {
        long double acc = 0.0L;
        for (int k = 0; k < queries.cols; ++k) acc += queries.at(i, k) * keys.at(j, k);
        scores.at(i, j) = acc * scale;
      }
    }
    masked_softmax_rows(scores, mask);
    parts.push_back(matmul(scores, values));
  }
  cat = parts[0];
  for (int h = 1; h < heads; ++h) cat = concat_cols(cat, parts[h]);
  return matmul(cat, from_param(store, prefix + ".Wo"));
}

LMat fuse_modality(const char* name, const LMat& states, const std::vector<std::uint8_t>& mask,
                   const std::vector<std::pair<const char*, const LMat*>>& sources,
                   const std::vector<std::pair<const char*, const std::vector<std::uint8_t>*>>& masks,
                   const ParamStore& store, int heads) {
  const std::string mp = std::string("fuse.") + name;
  LMat cat(states.rows, 0);
  bool first = true;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    LMat att = cross_attend(*sources[s].second, states, *masks[s].second, store,
                            mp + ".att_" + sources[s].first, heads);
    cat = first ? att : concat_cols(cat, att);
    first = false;
  }
  LMat mixed = relu(matmul(cat, from_param(store, mp + ".Wcat")));
  LMat normed = layer_norm(add(mixed, states), from_param(store, mp + ".ln.gain"),
                           from_param(store, mp + ".ln.shift"), 1e-5L);
  LMat logits = matmul(tanh_m(matmul(normed, from_param(store, mp + ".pool.W2"))),
                       from_param(store, mp + ".pool.W1"));
  LMat weights(1, normed.rows);
  for (int i = 0; i < normed.rows; ++i) weights.at(0, i) = logits.at(i, 0);
  masked_softmax_rows(weights, mask);
  return matmul(weights, normed);
}

std::vector<int> with_sos_eos(const TokenIds& ids) {
  std::vector<int> seq;
  seq.push_back(Vocabulary::kSos);
  seq.insert(seq.end(), ids.begin(), ids.end());
  seq.push_back(Vocabulary::kEos);
  return seq;
}

std::vector<int> history_ids(const DialogInstance& dialog, int turn, const Vocabulary& vocab,
                             const TrainConfig& cfg) {
  std::vector<int> ids;
  if (turn == 0) {
    ids = vocab.encode(dialog.caption);
    if (static_cast<int>(ids.size()) > cfg.max_caption_len) ids.resize(cfg.max_caption_len);
  } else {
    const DialogRound& prev = dialog.rounds[turn - 1];
    ids = vocab.encode(prev.question);
    if (static_cast<int>(ids.size()) > cfg.max_question_len) ids.resize(cfg.max_question_len);
    auto ans = vocab.encode(prev.answer);
    if (static_cast<int>(ans.size()) > cfg.max_answer_len) ans.resize(cfg.max_answer_len);
    ids.insert(ids.end(), ans.begin(), ans.end());
  }
  return ids;
}

}  // namespace

namespace {

// one row per candidate: the answer-encoder state the scores dot against
LMat candidate_encodings(const RoundContext& ctx, const ParamStore& store) {
  const LMat table = from_param(store, "embed.table");
  const LstmParams disc = lstm_params(store, "disc.lstm");
  LMat out(static_cast<int>(ctx.candidate_ids.size()), disc.U.rows);
  for (std::size_t c = 0; c < ctx.candidate_ids.size(); ++c) {
    auto run = lstm_encode(embed_rows(table, with_sos_eos(ctx.candidate_ids[c])), disc, -1, nullptr);
    for (int j = 0; j < out.cols; ++j) out.at(static_cast<int>(c), j) = run.last.h[j];
  }
  return out;
}

long double oracle_round_loss_impl(const RoundContext& ctx, const Vocabulary& vocab,
                                   const ParamStore& store, const TrainConfig& cfg,
                                   const LMat* fixed_candidates) {
  if (cfg.ablations.any()) {
    throw ConfigError("oracle_round_loss covers the un-ablated pipeline only");
  }
  const DialogInstance& dialog = ctx.dialog->dialog;
  const int heads = cfg.heads;
  const LMat table = from_param(store, "embed.table");
  const LstmParams enc_lstm = lstm_params(store, "enc.lstm");

  // features
  std::vector<int> q_ids = vocab.encode(dialog.rounds[ctx.round_index].question);
  if (static_cast<int>(q_ids.size()) > cfg.max_question_len) q_ids.resize(cfg.max_question_len);
  LMat q = lstm_encode(embed_rows(table, q_ids), enc_lstm, -1, nullptr).per_step;
  LMat h(ctx.round_index + 1, q.cols);
  for (int turn = 0; turn <= ctx.round_index; ++turn) {
    auto run = lstm_encode(embed_rows(table, history_ids(dialog, turn, vocab, cfg)), enc_lstm, -1, nullptr);
    for (int j = 0; j < h.cols; ++j) h.at(turn, j) = run.last.h[j];
  }
  const int d_v = static_cast<int>(dialog.regions[0].feature.size());
  LMat feats(static_cast<int>(dialog.regions.size()), d_v);
  for (int i = 0; i < feats.rows; ++i) {
    for (int j = 0; j < d_v; ++j) feats.at(i, j) = dialog.regions[i].feature[j];
  }
  LMat v = add_rowvec(matmul(feats, from_param(store, "enc.vproj.W")), from_param(store, "enc.vproj.b"));

  // graph-over-graph chain
  LMat h_star = graph_att(h, ctx.graphs.history, store, "hgat", heads);
  std::vector<std::uint8_t> h_mask(h.rows, 1);
  LMat h_hat = pool_softmax(h_star, store, "hpool", h_mask);
  LMat h_rep(q.rows, h_hat.cols);
  for (int i = 0; i < q.rows; ++i) {
    for (int j = 0; j < h_hat.cols; ++j) h_rep.at(i, j) = h_hat.at(0, j);
  }
  LMat q_prime = add_rowvec(matmul(concat_cols(q, h_rep), from_param(store, "qinject.W")),
                            from_param(store, "qinject.b"));
  LMat q_star = graph_att(q_prime, ctx.graphs.question, store, "qgat", heads);
  std::vector<std::uint8_t> q_mask(q.rows, 0);
  std::fill(q_mask.begin(), q_mask.begin() + ctx.q_valid, 1);
  LMat q_hat = pool_softmax(q_star, store, "qpool", q_mask);
  LMat q_rep(v.rows, q_hat.cols);
  for (int i = 0; i < v.rows; ++i) {
    for (int j = 0; j < q_hat.cols; ++j) q_rep.at(i, j) = q_hat.at(0, j);
  }
  LMat v_prime = add_rowvec(matmul(concat_cols(v, q_rep), from_param(store, "vinject.W")),
                            from_param(store, "vinject.b"));
  LMat v_star = graph_att(v_prime, ctx.graphs.image, store, "igat", heads);

  // fusion
  std::vector<std::uint8_t> v_mask(v_star.rows, 1);
  LMat v_bar = fuse_modality("v", v_star, v_mask,
                             {{"v", &v_star}, {"q", &q_star}, {"h", &h_star}},
                             {{"v", &v_mask}, {"q", &q_mask}, {"h", &h_mask}}, store, heads);
  LMat q_bar = fuse_modality("q", q_star, q_mask,
                             {{"q", &q_star}, {"v", &v_star}, {"h", &h_star}},
                             {{"q", &q_mask}, {"v", &v_mask}, {"h", &h_mask}}, store, heads);
  LMat h_bar = fuse_modality("h", h_star, h_mask,
                             {{"h", &h_star}, {"q", &q_star}, {"v", &v_star}},
                             {{"h", &h_mask}, {"q", &q_mask}, {"v", &v_mask}}, store, heads);
  LMat joint = matmul(concat_cols(concat_cols(q_bar, h_bar), v_bar), from_param(store, "fuse.WJ"));

  // discriminative loss
  LMat computed;
  if (!fixed_candidates) computed = candidate_encodings(ctx, store);
  const LMat& cands = fixed_candidates ? *fixed_candidates : computed;
  LMat scores(1, cands.rows);
  for (int c = 0; c < cands.rows; ++c) {
    long double dot = 0.0L;
    for (int j = 0; j < joint.cols; ++j) dot += cands.at(c, j) * joint.at(0, j);
    scores.at(0, c) = dot;
  }
  const long double loss_d = -log_softmax_row(scores).at(0, ctx.gt_index);

  // generative loss
  const LstmParams gen1 = lstm_params(store, "gen.lstm1");
  const LstmParams gen2 = lstm_params(store, "gen.lstm2");
  const LMat out_w = from_param(store, "gen.out.W");
  const LMat out_b = from_param(store, "gen.out.b");
  LstmStateL s1, s2;
  s1.c.assign(joint.cols, 0.0L);
  s2.c.assign(joint.cols, 0.0L);
  {
    LMat h1 = tanh_m(add_rowvec(matmul(joint, from_param(store, "gen.init1.W")),
                                from_param(store, "gen.init1.b")));
    LMat h2 = tanh_m(add_rowvec(matmul(joint, from_param(store, "gen.init2.W")),
                                from_param(store, "gen.init2.b")));
    s1.h.assign(h1.v.begin(), h1.v.end());
    s2.h.assign(h2.v.begin(), h2.v.end());
  }
  const std::vector<int> seq = with_sos_eos(ctx.answer_ids);
  long double loss_g = 0.0L;
  for (std::size_t n = 1; n < seq.size(); ++n) {
    lstm_step(embed_rows(table, {seq[n - 1]}), s1, gen1);
    LMat h1(1, static_cast<int>(s1.h.size()));
    for (int j = 0; j < h1.cols; ++j) h1.at(0, j) = s1.h[j];
    lstm_step(h1, s2, gen2);
    LMat h2(1, static_cast<int>(s2.h.size()));
    for (int j = 0; j < h2.cols; ++j) h2.at(0, j) = s2.h[j];
    LMat logits = add_rowvec(matmul(h2, out_w), out_b);
    loss_g -= log_softmax_row(logits).at(0, seq[n]);
  }
  return loss_d + loss_g;
}

}  // namespace

long double oracle_round_loss(const RoundContext& ctx, const Vocabulary& vocab,
                              const ParamStore& store, const TrainConfig& cfg) {
  return oracle_round_loss_impl(ctx, vocab, store, cfg, nullptr);
}

OracleGradCheckResult oracle_check_gradients(const RoundContext& ctx, const Vocabulary& vocab,
                                             ParamStore& store, const TrainConfig& cfg,
                                             double epsilon) {
  store.zero_grads();
  set_grad_enabled(true);
  AnswerEncoderCache cache;
  RoundLosses losses = round_loss(ctx, vocab, store, cfg, &cache);
  backward(losses.total);

  OracleGradCheckResult result;
  result.forward_gap = std::abs(static_cast<double>(oracle_round_loss(ctx, vocab, store, cfg)) -
                                losses.total.scalar());

  std::map<std::string, std::vector<double>> analytic;
  for (const auto& name : store.names()) {
    if (store.trainable(name)) analytic[name] = *store.get(name).grad;
  }

  NoGradGuard no_grad;
  const LMat base_candidates = candidate_encodings(ctx, store);
  for (const auto& [name, grads] : analytic) {
    Tensor& p = store.get(name);
    // candidate encodings depend only on the answer encoder and the embeddings
    const bool touches_candidates = name.rfind("disc.lstm", 0) == 0 || name == "embed.table";
    const LMat* fixed = touches_candidates ? nullptr : &base_candidates;
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double saved = (*p.data)[i];
      (*p.data)[i] = saved + epsilon;
      const long double up = oracle_round_loss_impl(ctx, vocab, store, cfg, fixed);
      (*p.data)[i] = saved - epsilon;
      const long double down = oracle_round_loss_impl(ctx, vocab, store, cfg, fixed);
      (*p.data)[i] = saved;
      const double numeric = static_cast<double>((up - down) / (2.0L * epsilon));
      const double a = grads[i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = name;
      }
    }
  }
  return result;
}

}  // namespace gog
