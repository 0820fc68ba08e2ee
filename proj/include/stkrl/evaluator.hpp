#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stkrl/kg_data.hpp"
#include "stkrl/model.hpp"
#include "stkrl/numerics.hpp"
#include "stkrl/rng.hpp"

namespace stkrl {

// Frozen embeddings used by every evaluation protocol: structure-based and
// text-based rows per entity plus relation rows.
struct EmbeddingView {
  Matrix structure;
  Matrix text;
  Matrix relations;
  NormKind norm = NormKind::L1;
};

// Text representations are computed once per entity with the current model.
EmbeddingView make_view(const ModelParams& params, const ReferenceCorpus& corpus,
                        std::size_t threads = 1);

struct RankedSentence {
  std::size_t sentence = 0;  // index into corpus.of(entity)
  std::size_t rank = 0;      // 1-based
  double score = 0.0;        // cosine against e_K
};

// Every reference sentence of `entity` ordered by attention score, with the
// same tie rule as top-m selection.
std::vector<RankedSentence> rank_sentences(EntityId entity, const ModelParams& params,
                                           const ReferenceCorpus& corpus);

// ---------------------------------------------------------------------------
// Triple classification.

enum class ComboKind { KK, SK, KS, SS };
inline constexpr std::array<ComboKind, 4> kAllCombos = {ComboKind::KK, ComboKind::SK,
                                                        ComboKind::KS, ComboKind::SS};
std::string to_string(ComboKind combo);

double combo_energy(const EmbeddingView& view, const Triple& t, ComboKind combo);

struct ScoredInstance {
  RelationId relation = 0;
  ComboKind combo = ComboKind::KK;
  double energy = 0.0;
  bool positive = false;
};

// Each positive expands to four combo instances, each paired with a
// negative that corrupts head or tail with the same representation type.
// Negatives avoid kg.all_true.
std::vector<ScoredInstance> classification_instances(std::span<const Triple> positives,
                                                     const EmbeddingView& view,
                                                     const KnowledgeGraph& kg, Rng& rng);

struct ThresholdFit {
  double delta = 0.0;
  double accuracy = 0.0;  // fraction in [0, 1]
};

// Threshold maximizing accuracy of "energy < delta => positive". Candidates
// are the midpoints between consecutive distinct energies, the smallest
// energy (nothing positive) and the largest energy + 1 (everything
// positive); ties go to the smallest candidate.
ThresholdFit best_threshold(std::span<const ScoredInstance> instances);

struct ThresholdTable {
  std::map<RelationId, double> per_relation;
  double global = 0.0;

  double threshold(RelationId r) const;
};

// Per relation over its pooled four-combo instances; `global` is fitted
// over everything and used for relations without validation instances.
ThresholdTable fit_thresholds(std::span<const ScoredInstance> validation);

// Percent of instances classified correctly.
double classification_accuracy(std::span<const ScoredInstance> instances,
                               const ThresholdTable& thresholds);

double triple_classification(std::span<const Triple> test, const EmbeddingView& view,
                             const KnowledgeGraph& kg, const ThresholdTable& thresholds,
                             Rng& rng);

struct TcReport {
  ThresholdTable thresholds;
  double valid_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t valid_instances = 0;
  std::size_t test_instances = 0;
  std::size_t relations_without_validation = 0;
};

// Fits thresholds on kg.valid and scores kg.test; negatives come from
// derive_seed(seed, seed_offset::kEvaluation).
TcReport evaluate_triple_classification(const EmbeddingView& view, const KnowledgeGraph& kg,
                                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Link prediction.

enum class RelationCategory { OneToOne, OneToMany, ManyToOne, ManyToMany };
inline constexpr std::array<RelationCategory, 4> kAllCategories = {
    RelationCategory::OneToOne, RelationCategory::OneToMany, RelationCategory::ManyToOne,
    RelationCategory::ManyToMany};
std::string to_string(RelationCategory c);

// hpt / tph over distinct (h, t) pairs in `train`; 1.5 splits "1" from "N".
// Indexed by relation id; relations without training triples are 1-to-1.
std::vector<RelationCategory> categorize_relations(std::span<const Triple> train,
                                                   std::size_t n_relations);

// Rank mean: a candidate's rank is the mean of its ranks in the
// structure-candidate list (A) and the text-candidate list (B), and Hits@10
// counts a hit in either list. Score mean: one list ranked by the mean of
// the two energies.
enum class LpRankMode { RankMean, ScoreMean };
std::string to_string(LpRankMode mode);

enum class Side { Head, Tail };

struct LpPrediction {
  std::size_t triple_index = 0;
  Side side = Side::Head;
  std::size_t rank_a_raw = 0, rank_b_raw = 0, rank_a_filter = 0, rank_b_filter = 0;
  double rank_raw = 0.0, rank_filter = 0.0;
  bool hit_raw = false, hit_filter = false;
};

struct LpCell {
  std::size_t count = 0;
  double mean_rank_raw = 0.0;
  double mean_rank_filter = 0.0;
  double hits10_raw = 0.0;
  double hits10_filter = 0.0;
};

struct LpResult {
  std::size_t predictions = 0;
  double mean_rank_raw = 0.0;
  double mean_rank_filter = 0.0;
  double hits10_raw = 0.0;  // percent
  double hits10_filter = 0.0;
  // Hits@10 of each candidate list alone.
  double hits10_a_raw = 0.0, hits10_a_filter = 0.0;
  double hits10_b_raw = 0.0, hits10_b_filter = 0.0;
  // [side][category]; side 0 = head, 1 = tail.
  std::array<std::array<LpCell, 4>, 2> categories{};
  std::vector<LpPrediction> details;  // filled when requested
};

struct LpOptions {
  LpRankMode mode = LpRankMode::RankMean;
  std::size_t threads = 1;
  bool keep_details = false;
};

// Ties in energy are broken by ascending entity id. The filtered setting
// drops candidates that form any triple of kg.all_true (other than the
// test triple itself).
LpResult link_prediction(std::span<const Triple> test, const EmbeddingView& view,
                         const KnowledgeGraph& kg, const LpOptions& options = {});

}  // namespace stkrl
