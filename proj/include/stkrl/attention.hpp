#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stkrl/numerics.hpp"

namespace stkrl {

struct AttentionConfig {
  std::size_t m = 5;
  double epsilon = 1e-6;
};

struct ScoredSentence {
  std::size_t index = 0;
  Vec representation;
  double score = 0.0;
};

// Cosine of a sentence representation against the structure embedding;
// 0 when either is zero. Throws UsageError on a dimension mismatch.
double attention_score(ConstSpan c, ConstSpan e_k);

// Sentence indices (ScoredSentence::index) of the min(m, n) best scores,
// descending; equal scores keep the lower index first.
std::vector<std::size_t> select_top_m(std::span<const ScoredSentence> scored, std::size_t m);

// Positions into `scored`, fully sorted by the same rule as select_top_m.
std::vector<std::size_t> rank_order(std::span<const ScoredSentence> scored);

struct AttentionAggregate {
  Vec s;
  std::vector<double> weights;  // max(score, epsilon), aligned with the input
  double total_weight = 0.0;
};

// s = sum_i w_i c_i / sum_i w_i with w_i = max(att_i, epsilon).
AttentionAggregate aggregate_attention_weights(std::span<const ScoredSentence> selected,
                                               double epsilon);
Vec aggregate_attention(std::span<const ScoredSentence> selected, double epsilon = 1e-6);

Vec aggregate_mean(std::span<const Vec> all);

}  // namespace stkrl
