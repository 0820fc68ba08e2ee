#include "stkrl/evaluator.hpp"

#include <algorithm>
#include <set>
#include <thread>

#include "stkrl/error.hpp"

namespace stkrl {

std::vector<RankedSentence> rank_sentences(EntityId entity, const ModelParams& params,
                                           const ReferenceCorpus& corpus) {
  const auto e_k = params.entities.row(static_cast<std::size_t>(entity));
  const auto sentences = corpus.of(entity);
  std::vector<ScoredSentence> scored;
  scored.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto enc = encode_sentence(params.encoder, sentences[i], params.words, params.positions);
    const double score = attention_score(enc.output, e_k);
    scored.push_back({i, {}, score});
  }
  std::vector<RankedSentence> out;
  const auto order = rank_order(scored);
  for (std::size_t r = 0; r < order.size(); ++r) {
    out.push_back({scored[order[r]].index, r + 1, scored[order[r]].score});
  }
  return out;
}


EmbeddingView make_view(const ModelParams& params, const ReferenceCorpus& corpus,
                        std::size_t threads) {
  EmbeddingView view;
  view.structure = params.entities;
  view.relations = params.relations;
  view.norm = params.config.norm;
  view.text = Matrix(params.entities.rows(), params.entities.cols());
  const auto text = all_text_vectors(params, corpus, threads);
  for (std::size_t e = 0; e < text.size(); ++e) {
    std::copy(text[e].begin(), text[e].end(), view.text.row(e).begin());
  }
  return view;
}

std::string to_string(ComboKind combo) {
  switch (combo) {
    case ComboKind::KK: return "KK";
    case ComboKind::SK: return "SK";
    case ComboKind::KS: return "KS";
    case ComboKind::SS: return "SS";
  }
  return "?";
}

namespace {

bool head_text(ComboKind c) { return c == ComboKind::SK || c == ComboKind::SS; }
bool tail_text(ComboKind c) { return c == ComboKind::KS || c == ComboKind::SS; }

ConstSpan entity_row(const EmbeddingView& view, EntityId e, bool text) {
  return (text ? view.text : view.structure).row(static_cast<std::size_t>(e));
}

}  // namespace

double combo_energy(const EmbeddingView& view, const Triple& t, ComboKind combo) {
  return energy_term(entity_row(view, t.head, head_text(combo)),
                     view.relations.row(static_cast<std::size_t>(t.relation)),
                     entity_row(view, t.tail, tail_text(combo)), view.norm);
}

std::vector<ScoredInstance> classification_instances(std::span<const Triple> positives,
                                                     const EmbeddingView& view,
                                                     const KnowledgeGraph& kg, Rng& rng) {
  std::vector<ScoredInstance> out;
  out.reserve(positives.size() * 8);
  for (const auto& t : positives) {
    for (ComboKind combo : kAllCombos) {
      out.push_back({t.relation, combo, combo_energy(view, t, combo), true});
      const auto neg = sample_negative(t, view.structure.rows(), kg.all_true, rng);
      out.push_back({t.relation, combo, combo_energy(view, neg.triple, combo), false});
    }
  }
  return out;
}

ThresholdFit best_threshold(std::span<const ScoredInstance> instances) {
  ThresholdFit best;
  if (instances.empty()) return best;
  std::vector<std::pair<double, bool>> sorted;
  sorted.reserve(instances.size());
  std::size_t total_neg = 0;
  for (const auto& i : instances) {
    sorted.emplace_back(i.energy, i.positive);
    if (!i.positive) ++total_neg;
  }
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());

  // Nothing classified positive.
  best.delta = sorted.front().first;
  best.accuracy = static_cast<double>(total_neg) / n;

  std::size_t pos_below = 0;
  std::size_t neg_below = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    (sorted[i].second ? pos_below : neg_below) += 1;
    const bool last = i + 1 == sorted.size();
    if (!last && sorted[i + 1].first == sorted[i].first) continue;
    const double delta =
        last ? sorted[i].first + 1.0 : 0.5 * (sorted[i].first + sorted[i + 1].first);
    const double acc = static_cast<double>(pos_below + (total_neg - neg_below)) / n;
    if (acc > best.accuracy) best = {delta, acc};
  }
  return best;
}

double ThresholdTable::threshold(RelationId r) const {
  auto it = per_relation.find(r);
  return it == per_relation.end() ? global : it->second;
}

ThresholdTable fit_thresholds(std::span<const ScoredInstance> validation) {
  ThresholdTable table;
  std::map<RelationId, std::vector<ScoredInstance>> by_relation;
  for (const auto& i : validation) by_relation[i.relation].push_back(i);
  for (const auto& [r, list] : by_relation) table.per_relation[r] = best_threshold(list).delta;
  table.global = best_threshold(validation).delta;
  return table;
}

double classification_accuracy(std::span<const ScoredInstance> instances,
                               const ThresholdTable& thresholds) {
  if (instances.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& i : instances) {
    const bool predicted = i.energy < thresholds.threshold(i.relation);
    if (predicted == i.positive) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(instances.size());
}

double triple_classification(std::span<const Triple> test, const EmbeddingView& view,
                             const KnowledgeGraph& kg, const ThresholdTable& thresholds,
                             Rng& rng) {
  const auto instances = classification_instances(test, view, kg, rng);
  return classification_accuracy(instances, thresholds);
}

TcReport evaluate_triple_classification(const EmbeddingView& view, const KnowledgeGraph& kg,
                                        std::uint64_t seed) {
  Rng rng(derive_seed(seed, seed_offset::kEvaluation));
  TcReport report;
  const auto valid = classification_instances(kg.valid, view, kg, rng);
  report.thresholds = fit_thresholds(valid);
  report.valid_accuracy = classification_accuracy(valid, report.thresholds);
  report.valid_instances = valid.size();
  const auto test = classification_instances(kg.test, view, kg, rng);
  report.test_accuracy = classification_accuracy(test, report.thresholds);
  report.test_instances = test.size();
  std::set<RelationId> missing;
  for (const auto& t : kg.test) {
    if (!report.thresholds.per_relation.contains(t.relation)) missing.insert(t.relation);
  }
  report.relations_without_validation = missing.size();
  return report;
}

std::string to_string(RelationCategory c) {
  switch (c) {
    case RelationCategory::OneToOne: return "1-to-1";
    case RelationCategory::OneToMany: return "1-to-N";
    case RelationCategory::ManyToOne: return "N-to-1";
    case RelationCategory::ManyToMany: return "N-to-N";
  }
  return "?";
}

std::vector<RelationCategory> categorize_relations(std::span<const Triple> train,
                                                   std::size_t n_relations) {
  std::vector<std::set<std::pair<EntityId, EntityId>>> pairs(n_relations);
  for (const auto& t : train) pairs.at(static_cast<std::size_t>(t.relation)).emplace(t.head, t.tail);
  std::vector<RelationCategory> out(n_relations, RelationCategory::OneToOne);
  for (std::size_t r = 0; r < n_relations; ++r) {
    if (pairs[r].empty()) continue;
    std::map<EntityId, std::size_t> tails_per_head;
    std::map<EntityId, std::size_t> heads_per_tail;
    for (const auto& [h, t] : pairs[r]) {
      ++tails_per_head[h];
      ++heads_per_tail[t];
    }
    const double n = static_cast<double>(pairs[r].size());
    const double tph = n / static_cast<double>(tails_per_head.size());
    const double hpt = n / static_cast<double>(heads_per_tail.size());
    const bool many_heads = hpt >= 1.5;
    const bool many_tails = tph >= 1.5;
    out[r] = many_heads ? (many_tails ? RelationCategory::ManyToMany : RelationCategory::ManyToOne)
                        : (many_tails ? RelationCategory::OneToMany : RelationCategory::OneToOne);
  }
  return out;
}

std::string to_string(LpRankMode mode) {
  return mode == LpRankMode::RankMean ? "rank-mean" : "score-mean";
}

namespace {

struct Ranks {
  std::size_t raw = 1;
  std::size_t filter = 1;
};

// Rank of `truth` under ascending score with id tie-break.
template <class Filtered>
Ranks rank_of(std::span<const double> score, EntityId truth, Filtered&& is_other_true) {
  Ranks r;
  const double s = score[static_cast<std::size_t>(truth)];
  for (std::size_t e = 0; e < score.size(); ++e) {
    const auto id = static_cast<EntityId>(e);
    if (id == truth) continue;
    const bool ahead = score[e] < s || (score[e] == s && id < truth);
    if (!ahead) continue;
    ++r.raw;
    if (!is_other_true(id)) ++r.filter;
  }
  return r;
}

void predict_side(const Triple& t, Side side, const EmbeddingView& view,
                  const KnowledgeGraph& kg, LpRankMode mode, LpPrediction& out,
                  std::vector<double>& a, std::vector<double>& b) {
  const std::size_t n = view.structure.rows();
  const auto r = view.relations.row(static_cast<std::size_t>(t.relation));
  a.resize(n);
  b.resize(n);
  for (std::size_t e = 0; e < n; ++e) {
    if (side == Side::Head) {
      const auto t_k = view.structure.row(static_cast<std::size_t>(t.tail));
      a[e] = energy_term(view.structure.row(e), r, t_k, view.norm);
      b[e] = energy_term(view.text.row(e), r, t_k, view.norm);
    } else {
      const auto h_k = view.structure.row(static_cast<std::size_t>(t.head));
      a[e] = energy_term(h_k, r, view.structure.row(e), view.norm);
      b[e] = energy_term(h_k, r, view.text.row(e), view.norm);
    }
  }
  const EntityId truth = side == Side::Head ? t.head : t.tail;
  auto other_true = [&](EntityId e) {
    Triple c = t;
    (side == Side::Head ? c.head : c.tail) = e;
    return kg.all_true.contains(c);
  };
  const Ranks ra = rank_of(a, truth, other_true);
  const Ranks rb = rank_of(b, truth, other_true);
  out.side = side;
  out.rank_a_raw = ra.raw;
  out.rank_b_raw = rb.raw;
  out.rank_a_filter = ra.filter;
  out.rank_b_filter = rb.filter;
  if (mode == LpRankMode::RankMean) {
    out.rank_raw = 0.5 * static_cast<double>(ra.raw + rb.raw);
    out.rank_filter = 0.5 * static_cast<double>(ra.filter + rb.filter);
    out.hit_raw = ra.raw <= 10 || rb.raw <= 10;
    out.hit_filter = ra.filter <= 10 || rb.filter <= 10;
  } else {
    for (std::size_t e = 0; e < n; ++e) a[e] = 0.5 * (a[e] + b[e]);
    const Ranks rm = rank_of(a, truth, other_true);
    out.rank_raw = static_cast<double>(rm.raw);
    out.rank_filter = static_cast<double>(rm.filter);
    out.hit_raw = rm.raw <= 10;
    out.hit_filter = rm.filter <= 10;
  }
}

}  // namespace

LpResult link_prediction(std::span<const Triple> test, const EmbeddingView& view,
                         const KnowledgeGraph& kg, const LpOptions& options) {
  std::vector<LpPrediction> preds(test.size() * 2);
  auto work = [&](std::size_t begin, std::size_t stride) {
    std::vector<double> a, b;
    for (std::size_t i = begin; i < test.size(); i += stride) {
      for (int s = 0; s < 2; ++s) {
        auto& p = preds[2 * i + static_cast<std::size_t>(s)];
        p.triple_index = i;
        predict_side(test[i], s == 0 ? Side::Head : Side::Tail, view, kg, options.mode, p, a, b);
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, test.size()));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }

  const auto categories = categorize_relations(kg.train, view.relations.rows());
  LpResult result;
  result.predictions = preds.size();
  std::array<std::array<std::size_t, 4>, 2> hits_raw{}, hits_filter{};
  std::size_t h_raw = 0, h_filter = 0, a_raw = 0, a_filter = 0, b_raw = 0, b_filter = 0;
  for (const auto& p : preds) {
    result.mean_rank_raw += p.rank_raw;
    result.mean_rank_filter += p.rank_filter;
    h_raw += p.hit_raw;
    h_filter += p.hit_filter;
    a_raw += p.rank_a_raw <= 10;
    a_filter += p.rank_a_filter <= 10;
    b_raw += p.rank_b_raw <= 10;
    b_filter += p.rank_b_filter <= 10;
    const auto side = static_cast<std::size_t>(p.side == Side::Tail);
    const auto cat =
        static_cast<std::size_t>(categories[static_cast<std::size_t>(test[p.triple_index].relation)]);
    auto& cell = result.categories[side][cat];
    ++cell.count;
    cell.mean_rank_raw += p.rank_raw;
    cell.mean_rank_filter += p.rank_filter;
    hits_raw[side][cat] += p.hit_raw;
    hits_filter[side][cat] += p.hit_filter;
  }
  if (!preds.empty()) {
    const double n = static_cast<double>(preds.size());
    auto pct = [n](std::size_t x) { return 100.0 * static_cast<double>(x) / n; };
    result.mean_rank_raw /= n;
    result.mean_rank_filter /= n;
    result.hits10_raw = pct(h_raw);
    result.hits10_filter = pct(h_filter);
    result.hits10_a_raw = pct(a_raw);
    result.hits10_a_filter = pct(a_filter);
    result.hits10_b_raw = pct(b_raw);
    result.hits10_b_filter = pct(b_filter);
  }
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t c = 0; c < 4; ++c) {
      auto& cell = result.categories[s][c];
      if (cell.count == 0) continue;
      cell.mean_rank_raw /= static_cast<double>(cell.count);
      cell.mean_rank_filter /= static_cast<double>(cell.count);
      cell.hits10_raw = 100.0 * static_cast<double>(hits_raw[s][c]) / static_cast<double>(cell.count);
      cell.hits10_filter =
          100.0 * static_cast<double>(hits_filter[s][c]) / static_cast<double>(cell.count);
    }
  }
  if (options.keep_details) result.details = std::move(preds);
  return result;
}

}  // namespace stkrl
