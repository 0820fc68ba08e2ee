#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stkrl/encoders.hpp"
#include "stkrl/error.hpp"
#include "stkrl/kg_data.hpp"
#include "stkrl/model.hpp"
#include "stkrl/numerics.hpp"
#include "stkrl/rng.hpp"

namespace stkrl {

struct TrainConfig {
  HyperParams hp;
  std::string warm_start;    // TransE checkpoint path; empty = random init
  std::string word_vectors;  // pre-trained word vectors; empty = random
  bool deterministic = true;
  std::size_t validation_interval = 10;
  std::size_t patience = 5;
  std::size_t validation_sample = 1000;
  std::size_t threads = 1;

  void validate() const;
};

struct TrainLogEntry {
  std::size_t epoch = 0;
  double loss = 0.0;        // mean batch loss
  double val_hits10 = -1.0; // filtered Hits@10 on the validation sample; -1 when not evaluated
  double seconds = 0.0;
};

// Random mode: entity/relation/encoder entries uniform in +-6/sqrt(k),
// entity rows then projected onto the unit ball and relation rows
// L2-normalized, positions uniform in +-6/sqrt(k_p).
// Warm mode copies entity and relation tables from a checkpoint.
ModelParams init_params(const TrainConfig& config, const KnowledgeGraph& kg,
                        const ReferenceCorpus& corpus, Rng& rng);

// Row-sparse gradients for the tables plus dense encoder gradients.
struct Gradients {
  SparseRows entities;
  SparseRows relations;
  EncoderGradients encoder;

  static Gradients zeros(const ModelParams& like);
};

// Per triple: four negatives (one per hinge term) or one (summed hinge).
using BatchNegatives = std::vector<std::vector<CorruptedTriple>>;
using FrozenAttention = std::map<EntityId, AttentionChoice>;

BatchNegatives sample_batch_negatives(std::span<const Triple> batch, const KnowledgeGraph& kg,
                                      const HyperParams& hp, Rng& rng);

struct BatchEvaluation {
  double loss = 0.0;
  std::size_t active_hinges = 0;
  std::size_t sentences_encoded = 0;
  // Distinct encoder parameter blocks seen on the tapes of this batch.
  std::size_t encoder_blocks_seen = 0;
  FrozenAttention attention;  // selections made while building text vectors
  // Per hinge: margin, positive energies, negated negative energies (zero
  // when inactive); they sum to `loss` up to rounding.
  Vec parts;
};

// Loss of a batch with fixed negatives. When `grads` is given, exact
// (sub)gradients are accumulated into it; with `frozen`, text vectors reuse
// the recorded top-m selection and weights.
BatchEvaluation batch_loss(const ModelParams& params, const ReferenceCorpus& corpus,
                           std::span<const Triple> batch, const BatchNegatives& negatives,
                           Gradients* grads, const FrozenAttention* frozen = nullptr);

// Plain SGD on every row present in `grads`; updated entity rows are then
// projected onto the unit L2 ball.
void apply_sgd(ModelParams& params, const Gradients& grads, double learning_rate);

using StepStats = BatchEvaluation;

// One mini-batch: sample negatives, accumulate gradients, update.
// Throws NumericError (parameters untouched) on a non-finite loss.
StepStats train_step(std::span<const Triple> batch, ModelParams& params, const KnowledgeGraph& kg,
                     const ReferenceCorpus& corpus, const HyperParams& hp, Rng& rng);

// Dense gradient per ModelParams::blocks() entry.
std::vector<Vec> dense_gradients(const ModelParams& params, const Gradients& grads);

class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, std::shared_ptr<const ModelParams> last_good)
      : NumericError(what), last_good_(std::move(last_good)) {}
  const std::shared_ptr<const ModelParams>& last_good() const { return last_good_; }

 private:
  std::shared_ptr<const ModelParams> last_good_;
};

struct TrainResult {
  ModelParams params;  // best-validation parameters (final ones without validation)
  std::vector<TrainLogEntry> log;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

using ValidationMetric = std::function<double(const ModelParams&)>;
using EpochCallback = std::function<void(const TrainLogEntry&)>;

// Without `metric`, validation uses filtered Hits@10 over a sample of
// kg.valid; no validation happens when kg.valid is empty.
TrainResult train(const TrainConfig& config, const KnowledgeGraph& kg,
                  const ReferenceCorpus& corpus, const ValidationMetric& metric = {},
                  const EpochCallback& on_epoch = {});

struct ModelGradCheckOptions {
  std::size_t total_coords = 200;
  double step = 1e-5;
  double tolerance = 1e-4;
};

// Finite-difference check of the full single-batch loss over every
// parameter table. With stop-gradient attention the selection and weights
// are held at their base-point values.
GradCheckReport gradcheck_model(const TrainConfig& config, const KnowledgeGraph& kg,
                                const ReferenceCorpus& corpus,
                                const ModelGradCheckOptions& options = {});

}  // namespace stkrl
