#pragma once

#include <map>
#include <vector>

#include "gog/corpus.hpp"
#include "gog/param_store.hpp"
#include "gog/tensor.hpp"

namespace gog {

using TokenIds = std::vector<int>;

struct CandidateScores {
  std::vector<double> scores;
  std::vector<int> ranking;  // candidate indices, best first; ties by index
};

std::vector<int> rank_descending(const std::vector<double>& scores);

/// Candidate encodings are pure functions of the answer tokens, so repeated
/// candidates within one forward pass share a single LSTM run.
struct AnswerEncoderCache {
  std::map<TokenIds, Tensor> encodings;
};

/// Runs [SOS, ids..., EOS] through the answer encoder; returns the last hidden
/// state (1 x d). The joint vector is deliberately not involved.
Tensor encode_answer(const TokenIds& ids, ParamStore& store, AnswerEncoderCache* cache = nullptr);

/// Dot products of each candidate encoding with J under a 100-way log-softmax.
CandidateScores discriminative_score(const Tensor& joint, const std::vector<TokenIds>& candidates,
                                     ParamStore& store, AnswerEncoderCache* cache = nullptr);

/// Cross-entropy of the ground-truth candidate under the same softmax.
Tensor discriminative_loss(const Tensor& joint, const std::vector<TokenIds>& candidates, int gt_index,
                           ParamStore& store, AnswerEncoderCache* cache = nullptr);

/// Teacher-forced log-likelihood of one answer under the two-layer recurrent
/// decoder seeded from J. Predicts each token of [ids..., EOS] in turn.
Tensor generative_log_likelihood(const Tensor& joint, const TokenIds& ids, ParamStore& store);

Tensor generative_loss(const Tensor& joint, const TokenIds& gt_ids, ParamStore& store);

/// Per-candidate summed token log-likelihoods; ranking by score.
CandidateScores generative_score(const Tensor& joint, const std::vector<TokenIds>& candidates,
                                 ParamStore& store);

/// The multi-task objective: an unweighted sum.
Tensor multitask_loss(const Tensor& loss_d, const Tensor& loss_g);

}  // namespace gog
