#include "gog/decoders.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gog/error.hpp"
#include "gog/lstm.hpp"
#include "gog/ops.hpp"

namespace gog {

std::vector<int> rank_descending(const std::vector<double>& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&scores](int a, int b) { return scores[a] > scores[b]; });
  return order;
}

namespace {

TokenIds with_sos_eos(const TokenIds& ids) {
  TokenIds out;
  out.reserve(ids.size() + 2);
  out.push_back(Vocabulary::kSos);
  out.insert(out.end(), ids.begin(), ids.end());
  out.push_back(Vocabulary::kEos);
  return out;
}

struct GenState {
  LstmState l1, l2;
};

GenState gen_init(const Tensor& joint, ParamStore& store) {
  GenState s;
  s.l1.hidden = tanh_op(linear(joint, "gen.init1.W", "gen.init1.b", store));
  s.l2.hidden = tanh_op(linear(joint, "gen.init2.W", "gen.init2.b", store));
  s.l1.cell = zeros(1, s.l1.hidden.cols);
  s.l2.cell = zeros(1, s.l2.hidden.cols);
  return s;
}

}  // namespace

Tensor encode_answer(const TokenIds& ids, ParamStore& store, AnswerEncoderCache* cache) {
  const TokenIds seq = with_sos_eos(ids);
  if (cache) {
    auto it = cache->encodings.find(seq);
    if (it != cache->encodings.end()) return it->second;
  }
  Tensor emb = embedding_lookup(store.get("embed.table"), seq);
  Tensor enc = lstm_encode(emb, store, "disc.lstm").last.hidden;
  if (cache) cache->encodings.emplace(seq, enc);
  return enc;
}

namespace {

Tensor disc_log_probs(const Tensor& joint, const std::vector<TokenIds>& candidates, ParamStore& store,
                      AnswerEncoderCache* cache) {
  if (candidates.empty()) throw ValidationError("discriminative decoder: no candidates");
  std::vector<Tensor> encodings;
  encodings.reserve(candidates.size());
  for (const TokenIds& c : candidates) encodings.push_back(encode_answer(c, store, cache));
  Tensor stacked = concat_rows(encodings);                    // 100 x d
  Tensor scores = transpose(matmul(stacked, transpose(joint)));  // 1 x 100
  return log_softmax_row(scores);
}

}  // namespace

CandidateScores discriminative_score(const Tensor& joint, const std::vector<TokenIds>& candidates,
                                     ParamStore& store, AnswerEncoderCache* cache) {
  Tensor logp = disc_log_probs(joint, candidates, store, cache);
  CandidateScores out;
  out.scores = *logp.data;
  out.ranking = rank_descending(out.scores);
  return out;
}

Tensor discriminative_loss(const Tensor& joint, const std::vector<TokenIds>& candidates, int gt_index,
                           ParamStore& store, AnswerEncoderCache* cache) {
  if (gt_index < 0 || gt_index >= static_cast<int>(candidates.size())) {
    throw ValidationError("discriminative loss: gt_index out of range");
  }
  return scale(pick(disc_log_probs(joint, candidates, store, cache), gt_index), -1.0);
}

Tensor generative_log_likelihood(const Tensor& joint, const TokenIds& ids, ParamStore& store) {
  const TokenIds seq = with_sos_eos(ids);
  const Tensor& table = store.get("embed.table");
  GenState s = gen_init(joint, store);
  Tensor total;
  for (std::size_t n = 1; n < seq.size(); ++n) {
    Tensor x = embedding_lookup(table, {seq[n - 1]});
    s.l1 = lstm_step(x, s.l1, "gen.lstm1", store);
    s.l2 = lstm_step(s.l1.hidden, s.l2, "gen.lstm2", store);
    Tensor logp = log_softmax_row(linear(s.l2.hidden, "gen.out.W", "gen.out.b", store));
    Tensor term = pick(logp, seq[n]);
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

Tensor generative_loss(const Tensor& joint, const TokenIds& gt_ids, ParamStore& store) {
  return scale(generative_log_likelihood(joint, gt_ids, store), -1.0);
}

CandidateScores generative_score(const Tensor& joint, const std::vector<TokenIds>& candidates,
                                 ParamStore& store) {
  CandidateScores out;
  out.scores.reserve(candidates.size());
  for (const TokenIds& c : candidates) {
    out.scores.push_back(generative_log_likelihood(joint, c, store).scalar());
  }
  out.ranking = rank_descending(out.scores);
  return out;
}

Tensor multitask_loss(const Tensor& loss_d, const Tensor& loss_g) {
  if (!std::isfinite(loss_d.scalar()) || !std::isfinite(loss_g.scalar())) {
    throw NumericalError("multitask_loss: non-finite component");
  }
  return add(loss_d, loss_g);
}

}  // namespace gog
