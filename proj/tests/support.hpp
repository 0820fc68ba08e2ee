#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stkrl/evaluator.hpp"
#include "stkrl/kg_data.hpp"
#include "stkrl/model.hpp"
#include "stkrl/trainer.hpp"

namespace testing {

using namespace stkrl;

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("stkrl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

inline KnowledgeGraph kg_from_text(const std::string& train, const std::string& valid = "",
                                   const std::string& test = "") {
  KnowledgeGraph kg;
  std::istringstream a(train), b(valid), c(test);
  load_triples(a, kg, Split::Train);
  load_triples(b, kg, Split::Valid);
  load_triples(c, kg, Split::Test);
  return kg;
}

// Model whose text vector for an entity with the one-token sentence "<name>"
// is tanh(word vector of <name>): RNN, k = k_w = 2, k_p = 1, W = [I | 0],
// U = 0, b = 0, position vectors zero.
struct HandModel {
  KnowledgeGraph kg;
  ReferenceCorpus corpus;
  ModelParams params;
};

inline std::string one_token_corpus(const KnowledgeGraph& kg) {
  std::string text;
  for (std::size_t e = 0; e < kg.entities.size(); ++e) {
    text += std::to_string(e) + "\t0\t" + entity_token(kg.entities.name(static_cast<EntityId>(e))) + "\n";
  }
  return text;
}

inline ModelParams hand_params(const KnowledgeGraph& kg, const ReferenceCorpus& corpus,
                               const std::vector<std::array<double, 2>>& structure,
                               const std::vector<std::array<double, 2>>& relations,
                               const std::vector<std::array<double, 2>>& words) {
  ModelParams p;
  p.config.k = 2;
  p.config.k_w = 2;
  p.config.k_p = 1;
  p.config.d = corpus.clip_d;
  p.config.encoder = EncoderKind::Rnn;
  p.entities = Matrix(kg.entities.size(), 2);
  p.relations = Matrix(kg.relations.size(), 2);
  for (std::size_t i = 0; i < structure.size(); ++i) {
    p.entities(i, 0) = structure[i][0];
    p.entities(i, 1) = structure[i][1];
  }
  for (std::size_t i = 0; i < relations.size(); ++i) {
    p.relations(i, 0) = relations[i][0];
    p.relations(i, 1) = relations[i][1];
  }
  p.words.vectors = Matrix(corpus.words.size(), 2);
  p.words.loaded.assign(corpus.words.size(), false);
  for (std::size_t e = 0; e < words.size(); ++e) {
    const auto id = corpus.words.find(entity_token(kg.entities.name(static_cast<EntityId>(e))));
    if (!id) continue;
    p.words.vectors(static_cast<std::size_t>(*id), 0) = words[e][0];
    p.words.vectors(static_cast<std::size_t>(*id), 1) = words[e][1];
  }
  p.positions.clip_d = corpus.clip_d;
  p.positions.vectors = Matrix(static_cast<std::size_t>(2 * corpus.clip_d + 1), 1);
  p.encoder = EncoderParams::zeros(EncoderKind::Rnn, 2, 3);
  p.encoder.gates[0].W(0, 0) = 1.0;
  p.encoder.gates[0].W(1, 1) = 1.0;
  p.check_shapes();
  return p;
}

inline HandModel make_hand_model(const std::string& train, const std::string& valid,
                                 const std::string& test,
                                 const std::vector<std::array<double, 2>>& structure,
                                 const std::vector<std::array<double, 2>>& relations,
                                 const std::vector<std::array<double, 2>>& words) {
  HandModel m;
  m.kg = kg_from_text(train, valid, test);
  std::istringstream in(one_token_corpus(m.kg));
  m.corpus = read_corpus(in, m.kg);
  m.params = hand_params(m.kg, m.corpus, structure, relations, words);
  return m;
}

// ---------------------------------------------------------------------------
// Link-prediction oracle: scores every candidate from raw vectors and counts
// the candidates placed ahead of the truth by enumeration.

struct OracleRanks {
  std::size_t a_raw, b_raw, a_filter, b_filter;
};

inline double oracle_l1(const std::vector<double>& x, const std::vector<double>& r,
                        const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::fabs(x[i] + r[i] - y[i]);
  return s;
}

inline double oracle_l2(const std::vector<double>& x, const std::vector<double>& r,
                        const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] + r[i] - y[i]) * (x[i] + r[i] - y[i]);
  return std::sqrt(s);
}

struct OracleLp {
  std::vector<OracleRanks> ranks;  // per test triple: head then tail
  double mean_rank_raw = 0, mean_rank_filter = 0, hits_raw = 0, hits_filter = 0;
};

inline OracleLp oracle_link_prediction(const std::vector<std::vector<double>>& structure,
                                       const std::vector<std::vector<double>>& text,
                                       const std::vector<std::vector<double>>& relations,
                                       const std::vector<Triple>& test,
                                       const std::set<std::array<int, 3>>& all_true, bool l2) {
  auto energy = [&](const std::vector<double>& x, int r, const std::vector<double>& y) {
    return l2 ? oracle_l2(x, relations[r], y) : oracle_l1(x, relations[r], y);
  };
  const int n = static_cast<int>(structure.size());
  OracleLp out;
  for (const auto& t : test) {
    for (int side = 0; side < 2; ++side) {
      const int truth = side == 0 ? t.head : t.tail;
      std::vector<std::pair<double, int>> la, lb;
      for (int c = 0; c < n; ++c) {
        if (side == 0) {
          la.push_back({energy(structure[c], t.relation, structure[t.tail]), c});
          lb.push_back({energy(text[c], t.relation, structure[t.tail]), c});
        } else {
          la.push_back({energy(structure[t.head], t.relation, structure[c]), c});
          lb.push_back({energy(structure[t.head], t.relation, text[c]), c});
        }
      }
      std::sort(la.begin(), la.end());
      std::sort(lb.begin(), lb.end());
      auto rank = [&](const std::vector<std::pair<double, int>>& list, bool filter) {
        std::size_t pos = 0;
        for (const auto& [score, c] : list) {
          if (c == truth) return pos + 1;
          std::array<int, 3> cand{t.head, t.relation, t.tail};
          cand[side == 0 ? 0 : 2] = c;
          if (filter && all_true.count(cand)) continue;
          ++pos;
        }
        return pos + 1;
      };
      const OracleRanks r{rank(la, false), rank(lb, false), rank(la, true), rank(lb, true)};
      out.ranks.push_back(r);
      out.mean_rank_raw += 0.5 * static_cast<double>(r.a_raw + r.b_raw);
      out.mean_rank_filter += 0.5 * static_cast<double>(r.a_filter + r.b_filter);
      out.hits_raw += (r.a_raw <= 10 || r.b_raw <= 10) ? 1 : 0;
      out.hits_filter += (r.a_filter <= 10 || r.b_filter <= 10) ? 1 : 0;
    }
  }
  const double m = static_cast<double>(out.ranks.size());
  if (m > 0) {
    out.mean_rank_raw /= m;
    out.mean_rank_filter /= m;
    out.hits_raw *= 100.0 / m;
    out.hits_filter *= 100.0 / m;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Threshold oracle: enumerates every way to cut the sorted distinct
// energies into a positive prefix and a negative suffix, counts correct
// decisions directly, and keeps the most accurate cut (fewest positives on
// ties). A cut is represented by the smallest energy (empty prefix), the
// midpoint of the two energies around it, or the largest energy + 1.

struct OracleThreshold {
  double delta;
  double accuracy;
};

inline OracleThreshold oracle_threshold(const std::vector<std::pair<double, bool>>& inst) {
  std::vector<double> energies;
  for (const auto& [e, pos] : inst) energies.push_back(e);
  std::sort(energies.begin(), energies.end());
  energies.erase(std::unique(energies.begin(), energies.end()), energies.end());
  if (energies.empty()) return {0.0, 0.0};
  std::vector<double> candidates;
  for (std::size_t j = 0; j <= energies.size(); ++j) {
    if (j == 0) {
      candidates.push_back(energies.front());
    } else if (j == energies.size()) {
      candidates.push_back(energies.back() + 1.0);
    } else {
      candidates.push_back((energies[j - 1] + energies[j]) / 2.0);
    }
  }
  OracleThreshold best{0.0, -1.0};
  for (double delta : candidates) {
    std::size_t correct = 0;
    for (const auto& [e, pos] : inst) correct += ((e < delta) == pos) ? 1 : 0;
    const double acc = static_cast<double>(correct) / static_cast<double>(inst.size());
    if (acc > best.accuracy || (acc == best.accuracy && delta < best.delta)) best = {delta, acc};
  }
  return best;
}

}  // namespace testing
