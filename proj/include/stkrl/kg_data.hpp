#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "stkrl/numerics.hpp"
#include "stkrl/rng.hpp"

namespace stkrl {

using EntityId = std::int32_t;
using RelationId = std::int32_t;
using WordId = std::int32_t;

// Bidirectional name <-> dense id table. Ids are assigned in insertion order.
class IdTable {
 public:
  std::int32_t intern(const std::string& name);
  std::optional<std::int32_t> find(std::string_view name) const;
  const std::string& name(std::int32_t id) const { return names_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::unordered_map<std::string, std::int32_t> ids_;
  std::vector<std::string> names_;
};

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  auto operator<=>(const Triple&) const = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(t.head);
    h = h * 0x100000001B3ULL ^ static_cast<std::uint32_t>(t.relation);
    h = h * 0x100000001B3ULL ^ static_cast<std::uint32_t>(t.tail);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

using TripleSet = std::unordered_set<Triple, TripleHash>;

enum class Split { Train, Valid, Test };

struct KnowledgeGraph {
  IdTable entities;
  IdTable relations;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  TripleSet train_set;
  TripleSet all_true;

  const std::vector<Triple>& split(Split s) const;
  std::vector<Triple>& split(Split s);

  // Adds a triple by id. Duplicates within the split are ignored; a triple
  // already present in another split raises DataError. Returns true if added.
  bool add(Split s, const Triple& t);
  bool valid_ids(const Triple& t) const;
};

// Reads `head<TAB>relation<TAB>tail` lines. Only the train split may
// introduce new names.
void load_triples(std::istream& in, KnowledgeGraph& kg, Split split);
void load_triples(const std::string& path, KnowledgeGraph& kg, Split split);
void write_triples(std::ostream& out, const KnowledgeGraph& kg, Split split);

// output[i] = clamp(i - anchor, -d, d)
std::vector<int> compute_position_ids(std::size_t n, std::size_t anchor, int d);

struct ReferenceSentence {
  EntityId entity = 0;
  std::vector<WordId> tokens;
  std::size_t anchor = 0;
  std::vector<int> position_ids;

  bool operator==(const ReferenceSentence&) const = default;
};

struct ReferenceCorpus {
  IdTable words;
  std::map<EntityId, std::vector<ReferenceSentence>> sentences;
  std::size_t cap = 40;
  int clip_d = 10;

  // Empty span for entities without sentences.
  std::span<const ReferenceSentence> of(EntityId e) const;
  std::size_t total_sentences() const;
  std::string text(const ReferenceSentence& s) const;
};

// Lowercased, whitespace-separated tokens; underscores in names count as
// spaces. The collapsed single token for an entity name joins its words
// with '_'.
std::vector<std::string> tokenize(std::string_view text);
std::string entity_token(std::string_view name);

// Splits on '.', '!' or '?' followed by whitespace (or end of input).
std::vector<std::string> split_sentences(std::string_view text);

ReferenceCorpus extract_reference_sentences(std::string_view text, const KnowledgeGraph& kg,
                                            std::size_t cap = 40, int d = 10);
ReferenceCorpus extract_reference_sentences(std::istream& in, const KnowledgeGraph& kg,
                                            std::size_t cap = 40, int d = 10);

// Corpus cache: `entity_id<TAB>anchor<TAB>token token ...` per sentence.
void write_corpus(std::ostream& out, const ReferenceCorpus& corpus);
ReferenceCorpus read_corpus(std::istream& in, const KnowledgeGraph& kg, std::size_t cap = 40,
                            int d = 10);
ReferenceCorpus read_corpus(const std::string& path, const KnowledgeGraph& kg,
                            std::size_t cap = 40, int d = 10);

struct WordFeatureTable {
  Matrix vectors;             // one row per word id
  std::vector<bool> loaded;   // false: randomly initialized

  std::size_t dim() const noexcept { return vectors.cols(); }
  std::size_t size() const noexcept { return vectors.rows(); }
  bool operator==(const WordFeatureTable&) const = default;
};

// All rows uniform in [-6/sqrt(k_w), 6/sqrt(k_w)].
WordFeatureTable random_word_vectors(std::size_t n_words, std::size_t k_w, Rng& rng);

// Lines `word v_1 ... v_kw`. An optional word2vec header `count dim` is
// skipped. Vocabulary words missing from the file get random rows.
WordFeatureTable load_word_vectors(std::istream& in, const IdTable& vocab, std::size_t k_w,
                                   Rng& rng);
WordFeatureTable load_word_vectors(const std::string& path, const IdTable& vocab,
                                   std::size_t k_w, Rng& rng);

// ---------------------------------------------------------------------------
// Synthetic datasets.

struct SyntheticSpec {
  std::size_t n_entities = 30;
  std::size_t n_relations = 4;
  std::size_t n_triples = 120;
  std::size_t signal_sentences_per_entity = 1;
  std::size_t noise_sentences_per_entity = 2;
  std::size_t sentence_length = 8;
  std::size_t vocab_size = 200;
  // Latent entity types; relation r maps type a to type (a + r + 1) mod
  // n_types. One type means triples are uniform over all entity pairs.
  std::size_t n_types = 1;
};

struct SyntheticDataset {
  KnowledgeGraph kg;
  ReferenceCorpus corpus;
  // Per entity, which corpus sentences are signal sentences.
  std::map<EntityId, std::vector<bool>> is_signal;
  std::vector<std::size_t> entity_type;
};

SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed,
                                            std::size_t cap = 40, int d = 10);

}  // namespace stkrl
