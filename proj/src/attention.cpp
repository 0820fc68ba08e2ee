#include "stkrl/attention.hpp"

#include <algorithm>
#include <numeric>

#include "stkrl/error.hpp"

namespace stkrl {

double attention_score(ConstSpan c, ConstSpan e_k) {
  if (c.size() != e_k.size()) throw UsageError("attention_score: dimension mismatch");
  return cosine(c, e_k);
}

std::vector<std::size_t> rank_order(std::span<const ScoredSentence> scored) {
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].score != scored[b].score) return scored[a].score > scored[b].score;
    return scored[a].index < scored[b].index;
  });
  return order;
}

std::vector<std::size_t> select_top_m(std::span<const ScoredSentence> scored, std::size_t m) {
  auto order = rank_order(scored);
  order.resize(std::min(m, order.size()));
  for (auto& pos : order) pos = scored[pos].index;
  return order;
}

AttentionAggregate aggregate_attention_weights(std::span<const ScoredSentence> selected,
                                               double epsilon) {
  if (selected.empty()) throw UsageError("aggregate_attention: empty selection");
  AttentionAggregate agg;
  agg.s.assign(selected.front().representation.size(), 0.0);
  for (const auto& sc : selected) {
    const double w = std::max(sc.score, epsilon);
    agg.weights.push_back(w);
    agg.total_weight += w;
  }
  for (std::size_t i = 0; i < selected.size(); ++i) {
    axpy(agg.weights[i] / agg.total_weight, selected[i].representation, agg.s);
  }
  return agg;
}

Vec aggregate_attention(std::span<const ScoredSentence> selected, double epsilon) {
  return aggregate_attention_weights(selected, epsilon).s;
}

Vec aggregate_mean(std::span<const Vec> all) {
  if (all.empty()) throw UsageError("aggregate_mean: empty list");
  Vec out(all.front().size(), 0.0);
  const double inv = 1.0 / static_cast<double>(all.size());
  for (const auto& v : all) axpy(inv, v, out);
  return out;
}

}  // namespace stkrl
