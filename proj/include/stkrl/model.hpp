#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stkrl/attention.hpp"
#include "stkrl/encoders.hpp"
#include "stkrl/kg_data.hpp"
#include "stkrl/numerics.hpp"
#include "stkrl/rng.hpp"

namespace stkrl {

// transE-only forces e_S = e_K, so every term reduces to E_KK.
enum class EnergyMode { Full, TransEOnly };
enum class LossMode { FourHinges, Summed };
enum class AggregationMode { Attention, Mean };
// Stop: attention weights are constants in backpropagation. Full: weights
// are differentiated through the clamp and the cosine.
enum class AttentionGrad { Stop, Full };

struct HyperParams {
  std::size_t k = 50;
  std::size_t k_w = 50;
  std::size_t k_p = 5;
  int d = 10;
  std::size_t m = 5;
  double margin = 1.0;
  NormKind norm = NormKind::L1;
  double learning_rate = 0.01;
  std::size_t batch_size = 120;
  std::size_t epochs = 500;
  double epsilon = 1e-6;
  std::uint64_t seed = 0;
  EnergyMode energy_mode = EnergyMode::Full;
  LossMode loss_mode = LossMode::FourHinges;
  EncoderKind encoder = EncoderKind::Lstm;
  AggregationMode aggregation = AggregationMode::Attention;
  AttentionGrad attention_grad = AttentionGrad::Stop;

  // Throws ConfigError naming the first offending field.
  void validate() const;
  AttentionConfig attention() const { return {m, epsilon}; }
  bool operator==(const HyperParams&) const = default;
};

struct ModelParams {
  HyperParams config;
  Matrix entities;   // n_entities x k, structure-based e_K
  Matrix relations;  // n_relations x k
  WordFeatureTable words;
  PositionFeatureTable positions;
  EncoderParams encoder;

  struct Block {
    std::string name;
    MutSpan values;
  };
  // Every parameter table in checkpoint order.
  std::vector<Block> blocks();

  // Throws ConfigError if any table disagrees with config.
  void check_shapes() const;
  bool operator==(const ModelParams&) const = default;
};

// ||a + r - b||
double energy_term(ConstSpan a, ConstSpan r, ConstSpan b, NormKind norm);

// E_KK + E_SS + E_SK + E_KS
double energy_total(ConstSpan h_k, ConstSpan h_s, ConstSpan r, ConstSpan t_k, ConstSpan t_s,
                    NormKind norm);

double margin_loss(double pos, double neg, double margin);

// Selected sentences and their clamped weights for one entity, replayable
// so that a gradient check can hold attention fixed.
struct AttentionChoice {
  std::vector<std::size_t> selected;  // corpus sentence indices, descending score
  std::vector<double> weights;        // clamped, aligned with `selected`
};

struct TextRepresentation {
  EntityId entity = 0;
  Vec s;
  bool fallback = false;  // no sentences (or transE-only): s is e_K
  AggregationMode mode = AggregationMode::Attention;
  std::vector<Encoding> encodings;  // one per corpus sentence
  std::vector<double> scores;       // cosine against e_K, per sentence
  AttentionChoice choice;
  double total_weight = 0.0;
};

// Encodes every reference sentence with the shared encoder and aggregates
// by attention (top-m) or mean. Entities without sentences fall back to
// e_K. A non-null `frozen` replays a previous selection and weights.
TextRepresentation build_text_representation(EntityId entity, const ModelParams& params,
                                             const ReferenceCorpus& corpus,
                                             const AttentionChoice* frozen = nullptr);

Vec text_vector(EntityId entity, const ModelParams& params, const ReferenceCorpus& corpus);

// One text vector per entity; entity ids index the result.
std::vector<Vec> all_text_vectors(const ModelParams& params, const ReferenceCorpus& corpus,
                                  std::size_t threads = 1);

struct CorruptedTriple {
  Triple triple;
  bool head_replaced = false;
};

inline constexpr int kNegativeRetries = 100;

// Replaces head or tail (fair coin) by a uniform entity, retrying until the
// result is outside `exclude` (the training set by default).
CorruptedTriple sample_negative(const Triple& t, const KnowledgeGraph& kg, Rng& rng);
CorruptedTriple sample_negative(const Triple& t, std::size_t n_entities, const TripleSet& exclude,
                                Rng& rng);

inline constexpr std::uint8_t kCheckpointVersion = 1;

void save_checkpoint(const ModelParams& params, std::ostream& out);
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::string& path);

std::string to_string(NormKind norm);
std::string to_string(EnergyMode mode);
std::string to_string(LossMode mode);
std::string to_string(AggregationMode mode);
std::string to_string(AttentionGrad mode);

}  // namespace stkrl
