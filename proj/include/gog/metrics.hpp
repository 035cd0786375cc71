#pragma once

#include <optional>
#include <vector>

namespace gog {

struct RoundResult {
  std::vector<int> ranking;  // candidate indices, best first
  int gt_index = 0;
  std::optional<std::vector<double>> relevance;
};

struct MetricsReport {
  double mrr = 0.0;
  double r_at_1 = 0.0;
  double r_at_5 = 0.0;
  double r_at_10 = 0.0;
  double mean_rank = 0.0;
  std::optional<double> ndcg;  // absent when no round carries relevance
  std::vector<int> gt_ranks;   // 1-based, one per round
};

/// Retrieval metrics over the ground-truth ranks. NDCG@K uses K = number of
/// candidates with positive relevance, gains rel / log2(1 + position), and a
/// brute-force ideal ordering.
MetricsReport compute_metrics(const std::vector<RoundResult>& rounds);

}  // namespace gog
