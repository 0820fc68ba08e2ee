#include "stkrl/model.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "stkrl/error.hpp"

namespace stkrl {

std::string to_string(NormKind norm) { return norm == NormKind::L1 ? "l1" : "l2"; }
std::string to_string(EnergyMode mode) {
  return mode == EnergyMode::Full ? "full" : "transE-only";
}
std::string to_string(LossMode mode) {
  return mode == LossMode::FourHinges ? "four-hinges" : "summed";
}
std::string to_string(AggregationMode mode) {
  return mode == AggregationMode::Attention ? "top-m" : "mean";
}
std::string to_string(AttentionGrad mode) {
  return mode == AttentionGrad::Stop ? "stop" : "full";
}

void HyperParams::validate() const {
  if (k < 1) throw ConfigError("dim", "must be at least 1");
  if (k_w < 1) throw ConfigError("word_dim", "must be at least 1");
  if (k_p < 1) throw ConfigError("position_dim", "must be at least 1");
  if (d < 1) throw ConfigError("clip_d", "must be at least 1");
  if (m < 1) throw ConfigError("top_m", "must be at least 1");
  if (!(margin > 0.0)) throw ConfigError("margin", "must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
  if (batch_size < 1) throw ConfigError("batch_size", "must be at least 1");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon", "must be positive");
}

std::vector<ModelParams::Block> ModelParams::blocks() {
  std::vector<Block> out;
  out.push_back({"entity_struct", entities.values()});
  out.push_back({"relation", relations.values()});
  out.push_back({"words", words.vectors.values()});
  out.push_back({"positions", positions.vectors.values()});
  for (auto& b : encoder.blocks()) out.push_back({b.name, b.values});
  return out;
}

void ModelParams::check_shapes() const {
  const auto& c = config;
  if (entities.cols() != c.k) throw ConfigError("entity_struct", "row length differs from k");
  if (relations.cols() != c.k) throw ConfigError("relation", "row length differs from k");
  if (words.vectors.cols() != c.k_w) throw ConfigError("words", "row length differs from k_w");
  if (words.loaded.size() != words.vectors.rows()) {
    throw ConfigError("words", "source flags do not match the table");
  }
  if (positions.clip_d != c.d || positions.vectors.rows() != static_cast<std::size_t>(2 * c.d + 1) ||
      positions.vectors.cols() != c.k_p) {
    throw ConfigError("positions", "table shape differs from (2d+1) x k_p");
  }
  if (encoder.kind != c.encoder ||
      encoder.gates.size() != EncoderParams::gate_count(c.encoder)) {
    throw ConfigError("encoder", "kind differs from the configuration");
  }
  for (const auto& g : encoder.gates) {
    if (g.W.rows() != c.k || g.W.cols() != c.k_w + c.k_p || g.U.rows() != c.k ||
        g.U.cols() != c.k || g.b.size() != c.k) {
      throw ConfigError("encoder", "gate shapes differ from (k, k_w + k_p)");
    }
  }
}

double energy_term(ConstSpan a, ConstSpan r, ConstSpan b, NormKind norm) {
  if (a.size() != r.size() || b.size() != r.size()) {
    throw UsageError("energy_term: dimension mismatch");
  }
  double s = 0.0;
  if (norm == NormKind::L1) {
    for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] + r[i] - b[i]);
    return s;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double v = a[i] + r[i] - b[i];
    s += v * v;
  }
  return std::sqrt(s);
}

double energy_total(ConstSpan h_k, ConstSpan h_s, ConstSpan r, ConstSpan t_k, ConstSpan t_s,
                    NormKind norm) {
  return energy_term(h_k, r, t_k, norm) + energy_term(h_s, r, t_s, norm) +
         energy_term(h_s, r, t_k, norm) + energy_term(h_k, r, t_s, norm);
}

double margin_loss(double pos, double neg, double margin) {
  return std::max(margin + pos - neg, 0.0);
}

TextRepresentation build_text_representation(EntityId entity, const ModelParams& params,
                                             const ReferenceCorpus& corpus,
                                             const AttentionChoice* frozen) {
  TextRepresentation rep;
  rep.entity = entity;
  rep.mode = params.config.aggregation;
  const auto e_k = params.entities.row(static_cast<std::size_t>(entity));
  const auto sentences = corpus.of(entity);
  if (params.config.energy_mode == EnergyMode::TransEOnly || sentences.empty()) {
    rep.fallback = true;
    rep.s.assign(e_k.begin(), e_k.end());
    return rep;
  }

  rep.encodings.reserve(sentences.size());
  for (const auto& s : sentences) {
    rep.encodings.push_back(encode_sentence(params.encoder, s, params.words, params.positions));
    rep.scores.push_back(attention_score(rep.encodings.back().output, e_k));
  }

  const std::size_t n = sentences.size();
  if (rep.mode == AggregationMode::Mean) {
    for (std::size_t i = 0; i < n; ++i) {
      rep.choice.selected.push_back(i);
      rep.choice.weights.push_back(1.0);
    }
  } else if (frozen) {
    rep.choice = *frozen;
  } else {
    std::vector<ScoredSentence> scored(n);
    for (std::size_t i = 0; i < n; ++i) scored[i] = {i, {}, rep.scores[i]};
    rep.choice.selected = select_top_m(scored, params.config.m);
    for (auto i : rep.choice.selected) {
      rep.choice.weights.push_back(std::max(rep.scores[i], params.config.epsilon));
    }
  }

  rep.s.assign(params.config.k, 0.0);
  for (double w : rep.choice.weights) rep.total_weight += w;
  for (std::size_t j = 0; j < rep.choice.selected.size(); ++j) {
    axpy(rep.choice.weights[j] / rep.total_weight,
         rep.encodings.at(rep.choice.selected[j]).output, rep.s);
  }
  return rep;
}

Vec text_vector(EntityId entity, const ModelParams& params, const ReferenceCorpus& corpus) {
  return build_text_representation(entity, params, corpus).s;
}

std::vector<Vec> all_text_vectors(const ModelParams& params, const ReferenceCorpus& corpus,
                                  std::size_t threads) {
  const std::size_t n = params.entities.rows();
  std::vector<Vec> out(n);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t e = begin; e < n; e += stride) {
      out[e] = text_vector(static_cast<EntityId>(e), params, corpus);
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    work(0, 1);
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  for (auto& th : pool) th.join();
  return out;
}

CorruptedTriple sample_negative(const Triple& t, std::size_t n_entities, const TripleSet& exclude,
                                Rng& rng) {
  if (n_entities < 2) throw SamplingError("negative sampling needs at least two entities");
  for (int attempt = 0; attempt < kNegativeRetries; ++attempt) {
    CorruptedTriple c{t, rng.coin()};
    const auto e = static_cast<EntityId>(rng.below(n_entities));
    if (c.head_replaced) {
      if (e == t.head) continue;
      c.triple.head = e;
    } else {
      if (e == t.tail) continue;
      c.triple.tail = e;
    }
    if (!exclude.contains(c.triple)) return c;
  }
  throw SamplingError("no negative found for triple after " + std::to_string(kNegativeRetries) +
                      " attempts");
}

CorruptedTriple sample_negative(const Triple& t, const KnowledgeGraph& kg, Rng& rng) {
  return sample_negative(t, kg.entities.size(), kg.train_set, rng);
}

}  // namespace stkrl
