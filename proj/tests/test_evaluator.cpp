#include <doctest.h>

#include <cmath>
#include <map>

#include "properties.hpp"
#include "stkrl/evaluator.hpp"
#include "support.hpp"

using namespace stkrl;

namespace {

EmbeddingView line_view(std::size_t n, NormKind norm = NormKind::L1) {
  EmbeddingView v;
  v.structure = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) v.structure(i, 0) = static_cast<double>(i);
  v.text = v.structure;
  v.relations = Matrix(1, 2);
  v.relations(0, 0) = 1.0;
  v.norm = norm;
  return v;
}

std::vector<ScoredInstance> instances(const std::vector<std::pair<double, bool>>& xs) {
  std::vector<ScoredInstance> out;
  for (const auto& [e, pos] : xs) out.push_back({0, ComboKind::KK, e, pos});
  return out;
}

std::vector<std::vector<double>> rows(const Matrix& m) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).begin(), m.row(i).end());
  return out;
}

}  // namespace

TEST_CASE("link prediction ranks a unique minimum first") {
  auto kg = testing::kg_from_text("e0\tr\te1\ne1\tr\te2\n", "", "");
  const auto view = line_view(3);
  const auto r = link_prediction(std::span<const Triple>(kg.train.data(), 1), view, kg,
                                 {LpRankMode::RankMean, 1, true});
  REQUIRE(r.details.size() == 2);
  for (const auto& d : r.details) {
    CHECK(d.rank_a_raw == 1);
    CHECK(d.rank_b_raw == 1);
    CHECK(d.rank_raw == 1.0);
    CHECK(d.hit_raw);
  }
  CHECK(r.mean_rank_raw == 1.0);
  CHECK(r.hits10_filter == 100.0);
}

TEST_CASE("link prediction matches the enumeration oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    auto kg = testing::kg_from_text("a\tr\tb\nb\tr\tc\nc\ts\td\na\ts\td\n", "d\tr\ta\n",
                                    "a\tr\tc\nb\ts\td\nd\ts\ta\n");
    EmbeddingView view;
    view.structure = properties::random_matrix(rng, 4, 3);
    view.text = properties::random_matrix(rng, 4, 3);
    view.relations = properties::random_matrix(rng, 2, 3);
    view.norm = trial % 2 ? NormKind::L2 : NormKind::L1;
    std::set<std::array<int, 3>> all_true;
    for (const auto& t : kg.all_true) all_true.insert({t.head, t.relation, t.tail});
    const auto oracle = testing::oracle_link_prediction(rows(view.structure), rows(view.text),
                                                        rows(view.relations), kg.test, all_true,
                                                        view.norm == NormKind::L2);
    const auto got = link_prediction(kg.test, view, kg, {LpRankMode::RankMean, 1, true});
    REQUIRE(got.details.size() == oracle.ranks.size());
    for (const auto& d : got.details) {
      const auto& o = oracle.ranks[2 * d.triple_index + (d.side == Side::Tail ? 1 : 0)];
      CHECK(d.rank_a_raw == o.a_raw);
      CHECK(d.rank_b_raw == o.b_raw);
      CHECK(d.rank_a_filter == o.a_filter);
      CHECK(d.rank_b_filter == o.b_filter);
    }
    CHECK(got.mean_rank_raw == doctest::Approx(oracle.mean_rank_raw));
    CHECK(got.mean_rank_filter == doctest::Approx(oracle.mean_rank_filter));
    CHECK(got.hits10_raw == doctest::Approx(oracle.hits_raw));
  }
}

TEST_CASE("score-mean mode ranks one merged list") {
  auto kg = testing::kg_from_text("e0\tr\te1\ne1\tr\te2\ne2\tr\te3\n");
  auto view = line_view(4);
  view.text(3, 0) = 1.0;
  const std::vector<Triple> test{kg.train[2]};
  // Tail of (e2, r, ?): mean energies 3, 2, 1, 1, so e3 loses the tie to e2.
  // Head of (?, r, e3): both lists put e2 first.
  const auto r = link_prediction(test, view, kg, {LpRankMode::ScoreMean, 1, true});
  REQUIRE(r.details.size() == 2);
  for (const auto& d : r.details) CHECK(d.rank_raw == (d.side == Side::Head ? 1.0 : 2.0));
}

TEST_CASE("categorize_relations") {
  auto kg = testing::kg_from_text(
      "a\tone\tb\nc\tone\td\n"
      "a\tmany\tb\na\tmany\tc\na\tmany\td\n"
      "b\tback\ta\nc\tback\ta\nd\tback\ta\n"
      "a\tmm\tb\na\tmm\tc\nb\tmm\tb\nb\tmm\tc\n");
  const auto cats = categorize_relations(kg.train, kg.relations.size() + 1);
  CHECK(cats[static_cast<std::size_t>(*kg.relations.find("one"))] == RelationCategory::OneToOne);
  CHECK(cats[static_cast<std::size_t>(*kg.relations.find("many"))] == RelationCategory::OneToMany);
  CHECK(cats[static_cast<std::size_t>(*kg.relations.find("back"))] == RelationCategory::ManyToOne);
  CHECK(cats[static_cast<std::size_t>(*kg.relations.find("mm"))] == RelationCategory::ManyToMany);
  CHECK(cats.back() == RelationCategory::OneToOne);
}

TEST_CASE("best_threshold") {
  const auto a = best_threshold(instances({{0.1, true}, {0.2, true}, {0.8, false}, {0.9, false}}));
  CHECK(a.delta == doctest::Approx(0.5));
  CHECK(a.accuracy == 1.0);

  const auto b = best_threshold(instances({{0.4, true}, {0.4, false}, {0.4, true}, {0.4, false}}));
  CHECK(b.accuracy == 0.5);

  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<double, bool>> xs;
    const int n = 2 + static_cast<int>(rng.below(20));
    for (int i = 0; i < n; ++i) {
      // Coarse grid so equal energies occur.
      xs.push_back({static_cast<double>(rng.below(6)) * 0.25, rng.below(2) == 0});
    }
    const auto oracle = testing::oracle_threshold(xs);
    const auto got = best_threshold(instances(xs));
    CHECK(got.delta == doctest::Approx(oracle.delta));
    CHECK(got.accuracy == doctest::Approx(oracle.accuracy));
  }
}

TEST_CASE("thresholds per relation with a global fallback") {
  std::vector<ScoredInstance> xs{{0, ComboKind::KK, 0.1, true}, {0, ComboKind::SS, 0.3, false},
                                 {1, ComboKind::KK, 2.0, true}, {1, ComboKind::KS, 3.0, false}};
  const auto table = fit_thresholds(xs);
  CHECK(table.threshold(0) == doctest::Approx(0.2));
  CHECK(table.threshold(1) == doctest::Approx(2.5));
  CHECK(table.threshold(7) == table.global);
  CHECK(classification_accuracy(xs, table) == 100.0);
}

TEST_CASE("triple classification on a separable line") {
  // Entity i sits at (i, 0) and r = (1, 0): true triples have zero energy,
  // every corruption at least 1.
  auto kg = testing::kg_from_text("e0\tr\te1\ne1\tr\te2\ne2\tr\te3\ne3\tr\te4\ne4\tr\te5\ne5\tr\te6\ne6\tr\te7\n",
                                  "", "");
  KnowledgeGraph split;
  split.entities = kg.entities;
  split.relations = kg.relations;
  for (std::size_t i = 0; i < kg.train.size(); ++i) {
    split.add(i < 4 ? Split::Train : (i < 6 ? Split::Valid : Split::Test), kg.train[i]);
  }
  const auto view = line_view(8);
  const auto report = evaluate_triple_classification(view, split, 3);
  CHECK(report.valid_accuracy == 100.0);
  CHECK(report.test_accuracy == 100.0);
  CHECK(report.valid_instances == 2 * 4 * 2);
  CHECK(report.test_instances == 1 * 4 * 2);
  const double delta = report.thresholds.threshold(0);
  CHECK(delta > 0.0);
  CHECK(delta <= 1.0);
}

TEST_CASE("make_view") {
  auto m = testing::make_hand_model("a\tr\tb\n", "", "", {{0.5, 0.5}, {1, 0}}, {{0.5, -0.5}},
                                    {{0.3, 0.2}, {-1, 2}});
  const auto view = make_view(m.params, m.corpus);
  CHECK(view.structure == m.params.entities);
  CHECK(view.relations == m.params.relations);
  CHECK(view.text(0, 0) == doctest::Approx(std::tanh(0.3)));
  CHECK(view.text(1, 1) == doctest::Approx(std::tanh(2.0)));
  CHECK(view.norm == m.params.config.norm);
}
