#include "stkrl/trainer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "stkrl/evaluator.hpp"

namespace stkrl {

void TrainConfig::validate() const {
  hp.validate();
  if (validation_interval < 1) throw ConfigError("validation_interval", "must be at least 1");
  if (patience < 1) throw ConfigError("patience", "must be at least 1");
  if (threads < 1) throw ConfigError("threads", "must be at least 1");
}

ModelParams init_params(const TrainConfig& config, const KnowledgeGraph& kg,
                        const ReferenceCorpus& corpus, Rng& rng) {
  config.validate();
  const auto& hp = config.hp;
  if (corpus.clip_d != hp.d) {
    throw ConfigError("clip_d", "corpus positions were computed with d=" +
                                    std::to_string(corpus.clip_d) + ", config has " +
                                    std::to_string(hp.d));
  }
  ModelParams p;
  p.config = hp;
  const double bound = 6.0 / std::sqrt(static_cast<double>(hp.k));
  auto fill = [&](MutSpan values, double b) {
    for (double& x : values) x = rng.uniform(-b, b);
  };

  if (config.warm_start.empty()) {
    p.entities = Matrix(kg.entities.size(), hp.k);
    p.relations = Matrix(kg.relations.size(), hp.k);
    fill(p.entities.values(), bound);
    fill(p.relations.values(), bound);
    for (std::size_t e = 0; e < p.entities.rows(); ++e) project_to_ball(p.entities.row(e));
    for (std::size_t r = 0; r < p.relations.rows(); ++r) {
      auto row = p.relations.row(r);
      const double n = l2_norm(row);
      if (n > 0.0) {
        for (double& x : row) x /= n;
      }
    }
  } else {
    const ModelParams source = load_checkpoint(config.warm_start);
    if (source.config.k != hp.k) throw ConfigError("init", "checkpoint dimension differs from k");
    if (source.entities.rows() != kg.entities.size() ||
        source.relations.rows() != kg.relations.size()) {
      throw ConfigError("init", "checkpoint tables do not match the knowledge graph");
    }
    p.entities = source.entities;
    p.relations = source.relations;
  }

  p.encoder = EncoderParams::zeros(hp.encoder, hp.k, hp.k_w + hp.k_p);
  for (auto& b : p.encoder.blocks()) fill(b.values, bound);
  p.positions.clip_d = hp.d;
  p.positions.vectors = Matrix(static_cast<std::size_t>(2 * hp.d + 1), hp.k_p);
  fill(p.positions.vectors.values(), 6.0 / std::sqrt(static_cast<double>(hp.k_p)));

  Rng word_rng(derive_seed(hp.seed, seed_offset::kWords));
  p.words = config.word_vectors.empty()
                ? random_word_vectors(corpus.words.size(), hp.k_w, word_rng)
                : load_word_vectors(config.word_vectors, corpus.words, hp.k_w, word_rng);
  p.check_shapes();
  return p;
}

Gradients Gradients::zeros(const ModelParams& like) {
  Gradients g;
  g.entities.dim = like.config.k;
  g.relations.dim = like.config.k;
  g.encoder = EncoderGradients::zeros(like.encoder, like.config.k_w, like.config.k_p);
  return g;
}

BatchNegatives sample_batch_negatives(std::span<const Triple> batch, const KnowledgeGraph& kg,
                                      const HyperParams& hp, Rng& rng) {
  const std::size_t per = hp.loss_mode == LossMode::FourHinges ? 4 : 1;
  BatchNegatives out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t j = 0; j < per; ++j) out[i].push_back(sample_negative(batch[i], kg, rng));
  }
  return out;
}

namespace {

// Hinge terms in order KK, SK, KS, SS: (head uses text, tail uses text).
constexpr std::array<std::pair<bool, bool>, 4> kTerms = {
    {{false, false}, {true, false}, {false, true}, {true, true}}};

void backward_text(const TextRepresentation& rep, ConstSpan ds, const ModelParams& params,
                   bool weights_differentiable, Gradients& grads) {
  if (rep.fallback) {
    grads.entities.add(rep.entity, ds);
    return;
  }
  const auto e_k = params.entities.row(static_cast<std::size_t>(rep.entity));
  Vec upstream(ds.size());
  for (std::size_t j = 0; j < rep.choice.selected.size(); ++j) {
    const auto& enc = rep.encodings[rep.choice.selected[j]];
    std::fill(upstream.begin(), upstream.end(), 0.0);
    axpy(rep.choice.weights[j] / rep.total_weight, ds, upstream);
    if (weights_differentiable) {
      // d s / d w_j = (c_j - s) / W; the clamp passes gradient only above epsilon.
      double dw = 0.0;
      for (std::size_t i = 0; i < ds.size(); ++i) dw += ds[i] * (enc.output[i] - rep.s[i]);
      dw /= rep.total_weight;
      if (rep.scores[rep.choice.selected[j]] > params.config.epsilon) {
        add_cosine_gradient(enc.output, e_k, dw, upstream, grads.entities.row(rep.entity));
      }
    }
    encoder_backward(enc.tape, upstream, grads.encoder);
  }
}

}  // namespace

BatchEvaluation batch_loss(const ModelParams& params, const ReferenceCorpus& corpus,
                           std::span<const Triple> batch, const BatchNegatives& negatives,
                           Gradients* grads, const FrozenAttention* frozen) {
  const auto& hp = params.config;
  if (negatives.size() != batch.size()) throw UsageError("batch_loss: negatives do not match batch");
  BatchEvaluation result;
  std::map<EntityId, TextRepresentation> reps;
  std::map<EntityId, Vec> ds;

  auto text = [&](EntityId e) -> const TextRepresentation& {
    auto it = reps.find(e);
    if (it != reps.end()) return it->second;
    const AttentionChoice* choice = nullptr;
    if (frozen) {
      if (auto f = frozen->find(e); f != frozen->end()) choice = &f->second;
    }
    auto rep = build_text_representation(e, params, corpus, choice);
    if (!rep.fallback) result.attention[e] = rep.choice;
    return reps.emplace(e, std::move(rep)).first->second;
  };
  auto vec = [&](EntityId e, bool use_text) -> ConstSpan {
    if (use_text) return text(e).s;
    return params.entities.row(static_cast<std::size_t>(e));
  };
  auto grad_target = [&](EntityId e, bool use_text) -> MutSpan {
    if (!use_text) return grads->entities.row(e);
    auto [it, inserted] = ds.try_emplace(e);
    if (inserted) it->second.assign(hp.k, 0.0);
    return it->second;
  };

  // Energy ||h + r - t|| of one term, with optional gradient of `scale * E`.
  auto term = [&](const Triple& t, bool head_text, bool tail_text, double scale) {
    const auto h = vec(t.head, head_text);
    const auto r = params.relations.row(static_cast<std::size_t>(t.relation));
    const auto tl = vec(t.tail, tail_text);
    Vec v(hp.k);
    for (std::size_t i = 0; i < hp.k; ++i) v[i] = h[i] + r[i] - tl[i];
    if (scale != 0.0 && grads) {
      add_norm_subgradient(v, hp.norm, scale, grad_target(t.head, head_text));
      add_norm_subgradient(v, hp.norm, scale, grads->relations.row(t.relation));
      add_norm_subgradient(v, hp.norm, -scale, grad_target(t.tail, tail_text));
    }
    return norm_score(v, hp.norm);
  };

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Triple& pos = batch[i];
    if (hp.loss_mode == LossMode::FourHinges) {
      if (negatives[i].size() != 4) throw UsageError("four-hinges mode needs four negatives");
      for (std::size_t j = 0; j < 4; ++j) {
        const auto [ht, tt] = kTerms[j];
        const Triple& neg = negatives[i][j].triple;
        const double e_pos = term(pos, ht, tt, 0.0);
        const double e_neg = term(neg, ht, tt, 0.0);
        const double hinge = hp.margin + e_pos - e_neg;
        const bool active = hinge > 0.0;
        result.parts.insert(result.parts.end(),
                            {active ? hp.margin : 0.0, active ? e_pos : 0.0, active ? -e_neg : 0.0});
        if (active) {
          result.loss += hinge;
          ++result.active_hinges;
          if (grads) {
            term(pos, ht, tt, 1.0);
            term(neg, ht, tt, -1.0);
          }
        }
      }
    } else {
      if (negatives[i].size() != 1) throw UsageError("summed mode needs one negative");
      const Triple& neg = negatives[i][0].triple;
      double e_pos = 0.0, e_neg = 0.0;
      std::array<double, 8> energies{};
      for (std::size_t j = 0; j < 4; ++j) {
        const auto [ht, tt] = kTerms[j];
        energies[j] = term(pos, ht, tt, 0.0);
        energies[4 + j] = -term(neg, ht, tt, 0.0);
        e_pos += energies[j];
        e_neg -= energies[4 + j];
      }
      const double hinge = hp.margin + e_pos - e_neg;
      const bool active = hinge > 0.0;
      result.parts.push_back(active ? hp.margin : 0.0);
      for (double e : energies) result.parts.push_back(active ? e : 0.0);
      if (active) {
        result.loss += hinge;
        ++result.active_hinges;
        if (grads) {
          for (const auto& [ht, tt] : kTerms) {
            term(pos, ht, tt, 1.0);
            term(neg, ht, tt, -1.0);
          }
        }
      }
    }
  }

  std::set<const EncoderParams*> blocks;
  for (const auto& [e, rep] : reps) {
    result.sentences_encoded += rep.encodings.size();
    for (const auto& enc : rep.encodings) blocks.insert(enc.tape.params);
  }
  result.encoder_blocks_seen = blocks.size();

  if (grads) {
    const bool differentiable = hp.attention_grad == AttentionGrad::Full &&
                                hp.aggregation == AggregationMode::Attention && !frozen;
    for (const auto& [e, g] : ds) backward_text(reps.at(e), g, params, differentiable, *grads);
  }
  return result;
}

void apply_sgd(ModelParams& params, const Gradients& grads, double learning_rate) {
  for (const auto& [e, g] : grads.entities.rows) {
    auto row = params.entities.row(static_cast<std::size_t>(e));
    axpy(-learning_rate, g, row);
    project_to_ball(row, 1.0);
  }
  for (const auto& [r, g] : grads.relations.rows) {
    axpy(-learning_rate, g, params.relations.row(static_cast<std::size_t>(r)));
  }
  for (const auto& [w, g] : grads.encoder.words.rows) {
    axpy(-learning_rate, g, params.words.vectors.row(static_cast<std::size_t>(w)));
  }
  for (const auto& [pos, g] : grads.encoder.positions.rows) {
    axpy(-learning_rate, g, params.positions.vectors.row(params.positions.row_of(pos)));
  }
}

namespace {

void apply_encoder_sgd(ModelParams& params, Gradients& grads, double learning_rate) {
  auto target = params.encoder.blocks();
  auto source = grads.encoder.params.blocks();
  for (std::size_t b = 0; b < target.size(); ++b) axpy(-learning_rate, source[b].values, target[b].values);
}

}  // namespace

StepStats train_step(std::span<const Triple> batch, ModelParams& params, const KnowledgeGraph& kg,
                     const ReferenceCorpus& corpus, const HyperParams& hp, Rng& rng) {
  const auto negatives = sample_batch_negatives(batch, kg, hp, rng);
  Gradients grads = Gradients::zeros(params);
  StepStats stats = batch_loss(params, corpus, batch, negatives, &grads);
  if (!std::isfinite(stats.loss)) {
    std::ostringstream msg;
    msg << "non-finite batch loss " << stats.loss << " over " << batch.size() << " triples ("
        << stats.active_hinges << " active hinges)";
    throw NumericError(msg.str());
  }
  apply_sgd(params, grads, hp.learning_rate);
  if (stats.sentences_encoded > 0) apply_encoder_sgd(params, grads, hp.learning_rate);
  return stats;
}

std::vector<Vec> dense_gradients(const ModelParams& params, const Gradients& grads) {
  auto& mutable_params = const_cast<ModelParams&>(params);
  std::vector<Vec> out;
  for (const auto& b : mutable_params.blocks()) out.emplace_back(b.values.size(), 0.0);
  auto scatter = [](Vec& dense, std::size_t dim, std::size_t row, const Vec& g) {
    std::copy(g.begin(), g.end(), dense.begin() + static_cast<std::ptrdiff_t>(row * dim));
  };
  for (const auto& [e, g] : grads.entities.rows) scatter(out[0], params.config.k, static_cast<std::size_t>(e), g);
  for (const auto& [r, g] : grads.relations.rows) scatter(out[1], params.config.k, static_cast<std::size_t>(r), g);
  for (const auto& [w, g] : grads.encoder.words.rows) scatter(out[2], params.config.k_w, static_cast<std::size_t>(w), g);
  for (const auto& [p, g] : grads.encoder.positions.rows) {
    scatter(out[3], params.config.k_p, params.positions.row_of(p), g);
  }
  auto enc = const_cast<Gradients&>(grads).encoder.params.blocks();
  for (std::size_t b = 0; b < enc.size(); ++b) out[4 + b].assign(enc[b].values.begin(), enc[b].values.end());
  return out;
}

TrainResult train(const TrainConfig& config, const KnowledgeGraph& kg,
                  const ReferenceCorpus& corpus, const ValidationMetric& metric,
                  const EpochCallback& on_epoch) {
  const auto& hp = config.hp;
  Rng init_rng(derive_seed(hp.seed, seed_offset::kInit));
  ModelParams params = init_params(config, kg, corpus, init_rng);
  Rng shuffle_rng(derive_seed(hp.seed, seed_offset::kShuffle));
  Rng negative_rng(derive_seed(hp.seed, seed_offset::kNegatives));

  std::vector<Triple> sample = kg.valid;
  {
    Rng eval_rng(derive_seed(hp.seed, seed_offset::kEvaluation));
    eval_rng.shuffle(sample);
    if (sample.size() > config.validation_sample) sample.resize(config.validation_sample);
  }
  ValidationMetric validate = metric;
  if (!validate && !sample.empty()) {
    validate = [&](const ModelParams& p) {
      const auto view = make_view(p, corpus, config.threads);
      return link_prediction(sample, view, kg, {LpRankMode::RankMean, config.threads}).hits10_filter;
    };
  }

  TrainResult result;
  std::optional<ModelParams> best;
  double best_metric = -std::numeric_limits<double>::infinity();
  std::size_t bad_evaluations = 0;
  std::vector<Triple> order = kg.train;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += hp.batch_size) {
      const std::size_t end = std::min(order.size(), b + hp.batch_size);
      std::span<const Triple> batch(order.data() + b, end - b);
      try {
        total += train_step(batch, params, kg, corpus, hp, negative_rng).loss;
      } catch (const NumericError& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + ": " + e.what(),
                            std::make_shared<const ModelParams>(params));
      }
      ++batches;
    }
    TrainLogEntry entry;
    entry.epoch = epoch;
    entry.loss = batches ? total / static_cast<double>(batches) : 0.0;
    bool stop = false;
    if (validate && epoch % config.validation_interval == 0) {
      entry.val_hits10 = validate(params);
      if (entry.val_hits10 > best_metric) {
        best_metric = entry.val_hits10;
        best = params;
        result.best_epoch = epoch;
        bad_evaluations = 0;
      } else if (++bad_evaluations >= config.patience) {
        stop = true;
      }
    }
    entry.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  if (best) {
    result.params = std::move(*best);
  } else {
    result.params = std::move(params);
    result.best_epoch = result.log.empty() ? 0 : result.log.back().epoch;
  }
  return result;
}

GradCheckReport gradcheck_model(const TrainConfig& config, const KnowledgeGraph& kg,
                                const ReferenceCorpus& corpus,
                                const ModelGradCheckOptions& options) {
  const auto& hp = config.hp;
  Rng init_rng(derive_seed(hp.seed, seed_offset::kInit));
  ModelParams params = init_params(config, kg, corpus, init_rng);
  const std::size_t n = std::min(hp.batch_size, kg.train.size());
  std::span<const Triple> batch(kg.train.data(), n);
  Rng rng(derive_seed(hp.seed, seed_offset::kGradCheck));
  const auto negatives = sample_batch_negatives(batch, kg, hp, rng);

  Gradients grads = Gradients::zeros(params);
  const auto base = batch_loss(params, corpus, batch, negatives, &grads);
  const FrozenAttention* frozen = hp.attention_grad == AttentionGrad::Stop ? &base.attention : nullptr;
  const auto dense = dense_gradients(params, grads);

  std::vector<ParamBlockView> views;
  auto blocks = params.blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    views.push_back({blocks[b].name, blocks[b].values, dense[b]});
  }
  GradCheckOptions fd;
  fd.step = options.step;
  fd.tolerance = options.tolerance;
  fd.seed = derive_seed(hp.seed, seed_offset::kGradCheck);
  fd.coords_per_block = (options.total_coords + views.size() - 1) / views.size();
  return finite_diff_check(
      [&] { return batch_loss(params, corpus, batch, negatives, nullptr, frozen).parts; }, views, fd);
}

}  // namespace stkrl
