#include "gog/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "gog/error.hpp"

namespace gog {

MetricsReport compute_metrics(const std::vector<RoundResult>& rounds) {
  if (rounds.empty()) throw ValidationError("compute_metrics: no rounds");
  MetricsReport report;
  double ndcg_sum = 0.0;
  int ndcg_rounds = 0;

  for (std::size_t r = 0; r < rounds.size(); ++r) {
    const RoundResult& round = rounds[r];
    const int k = static_cast<int>(round.ranking.size());
    std::vector<std::uint8_t> seen(k, 0);
    for (int idx : round.ranking) {
      if (idx < 0 || idx >= k || seen[idx]) {
        throw ValidationError("compute_metrics: round " + std::to_string(r) + " ranking is not a permutation");
      }
      seen[idx] = 1;
    }
    if (round.gt_index < 0 || round.gt_index >= k) {
      throw ValidationError("compute_metrics: round " + std::to_string(r) + " gt_index out of range");
    }

    int gt_rank = 0;
    for (int pos = 0; pos < k; ++pos) {
      if (round.ranking[pos] == round.gt_index) {
        gt_rank = pos + 1;
        break;
      }
    }
    report.gt_ranks.push_back(gt_rank);
    report.mrr += 1.0 / gt_rank;
    report.mean_rank += gt_rank;
    if (gt_rank <= 1) report.r_at_1 += 1.0;
    if (gt_rank <= 5) report.r_at_5 += 1.0;
    if (gt_rank <= 10) report.r_at_10 += 1.0;

    if (round.relevance) {
      const std::vector<double>& rel = *round.relevance;
      if (rel.size() != static_cast<std::size_t>(k)) {
        throw ValidationError("compute_metrics: round " + std::to_string(r) + " relevance length mismatch");
      }
      int top_k = 0;
      for (double v : rel) {
        if (v > 0.0) ++top_k;
      }
      if (top_k > 0) {
        double dcg = 0.0;
        for (int pos = 0; pos < top_k; ++pos) {
          dcg += rel[round.ranking[pos]] / std::log2(pos + 2.0);
        }
        std::vector<double> ideal = rel;
        std::sort(ideal.begin(), ideal.end(), std::greater<double>());
        double idcg = 0.0;
        for (int pos = 0; pos < top_k; ++pos) {
          idcg += ideal[pos] / std::log2(pos + 2.0);
        }
        ndcg_sum += dcg / idcg;
        ++ndcg_rounds;
      }
    }
  }

  const double n = static_cast<double>(rounds.size());
  report.mrr /= n;
  report.mean_rank /= n;
  report.r_at_1 /= n;
  report.r_at_5 /= n;
  report.r_at_10 /= n;
  if (ndcg_rounds > 0) report.ndcg = ndcg_sum / ndcg_rounds;
  return report;
}

}  // namespace gog
