#include <doctest.h>

#include <cmath>

#include "stkrl/attention.hpp"
#include "stkrl/error.hpp"
#include "stkrl/evaluator.hpp"
#include "support.hpp"

using namespace stkrl;

namespace {

std::vector<ScoredSentence> scored(const std::vector<double>& scores) {
  std::vector<ScoredSentence> out;
  for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({i, Vec{static_cast<double>(i)}, scores[i]});
  return out;
}

}  // namespace

TEST_CASE("attention_score") {
  const Vec e{0.3, -0.4};
  CHECK(attention_score(e, e) == doctest::Approx(1.0));
  CHECK(attention_score(Vec{-0.3, 0.4}, e) == doctest::Approx(-1.0));
  CHECK(std::fabs(attention_score(Vec{1, 0}, Vec{1, 1}) - 0.70710678) < 1e-8);
  CHECK_THROWS_AS(attention_score(Vec{1, 0, 0}, e), UsageError);
}

TEST_CASE("select_top_m") {
  CHECK(select_top_m(scored({0.2, 0.9, 0.5}), 2) == std::vector<std::size_t>{1, 2});
  CHECK(select_top_m(scored({0.1, 0.4}), 5) == std::vector<std::size_t>{1, 0});
  CHECK(select_top_m(scored({0.5, 0.5}), 1) == std::vector<std::size_t>{0});
  CHECK(rank_order(scored({0.2, 0.9, 0.5})) == std::vector<std::size_t>{1, 2, 0});
}

TEST_CASE("aggregate_attention") {
  std::vector<ScoredSentence> one{{0, Vec{0.3, -2.0}, -0.7}};
  CHECK(aggregate_attention(one) == Vec{0.3, -2.0});

  std::vector<ScoredSentence> two{{0, Vec{1, 0}, 0.8}, {1, Vec{0, 1}, 0.2}};
  const auto s = aggregate_attention(two);
  CHECK(s[0] == doctest::Approx(0.8));
  CHECK(s[1] == doctest::Approx(0.2));

  std::vector<ScoredSentence> negative{{0, Vec{1, 0}, -0.4}, {1, Vec{0, 1}, 0.0}};
  const auto u = aggregate_attention(negative);
  CHECK(u[0] == doctest::Approx(0.5));
  CHECK(u[1] == doctest::Approx(0.5));
}

TEST_CASE("aggregate_mean") {
  const std::vector<Vec> two{{1, 0}, {0, 1}};
  CHECK(aggregate_mean(two) == Vec{0.5, 0.5});
  const std::vector<Vec> single{{0.25, -3}};
  CHECK(aggregate_mean(single) == Vec{0.25, -3});
  const std::vector<Vec> same(4, Vec{0.1, 0.7});
  const auto m = aggregate_mean(same);
  CHECK(m[0] == doctest::Approx(0.1));
  CHECK(m[1] == doctest::Approx(0.7));
}

TEST_CASE("rank_sentences puts the sentence collinear with e_K first") {
  // With U = 0 the hand-set encoder returns tanh of the last word vector.
  auto kg = testing::kg_from_text("a\tr\tb\n");
  std::istringstream corpus_text("0\t0\ta x\n0\t0\ta y\n0\t0\ta\n");
  auto corpus = read_corpus(corpus_text, kg);
  auto params = testing::hand_params(kg, corpus, {{1.0, 1.0}, {0, 0}}, {{0, 0}}, {{0.5, 0.5}});
  // Sentence 2 ("a") encodes to tanh((0.5, 0.5)), collinear with e_K.
  const auto x = *corpus.words.find("x");
  const auto y = *corpus.words.find("y");
  params.words.vectors(static_cast<std::size_t>(x), 0) = -2.0;
  params.words.vectors(static_cast<std::size_t>(y), 1) = 3.0;
  const auto ranked = rank_sentences(0, params, corpus);
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].sentence == 2);
  CHECK(ranked[0].rank == 1);
  CHECK(ranked[0].score == doctest::Approx(1.0));

  // Reordering the sentences does not change the (score, text) ranking.
  std::istringstream reordered("0\t0\ta\n0\t0\ta y\n0\t0\ta x\n");
  auto corpus2 = read_corpus(reordered, kg);
  auto params2 = params;
  params2.words.vectors = Matrix(corpus2.words.size(), 2);
  for (const auto& w : corpus.words.names()) {
    const auto from = static_cast<std::size_t>(*corpus.words.find(w));
    const auto to = static_cast<std::size_t>(*corpus2.words.find(w));
    params2.words.vectors(to, 0) = params.words.vectors(from, 0);
    params2.words.vectors(to, 1) = params.words.vectors(from, 1);
  }
  const auto ranked2 = rank_sentences(0, params2, corpus2);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(ranked2[i].score == ranked[i].score);
    CHECK(corpus2.text(corpus2.of(0)[ranked2[i].sentence]) == corpus.text(corpus.of(0)[ranked[i].sentence]));
  }
}
