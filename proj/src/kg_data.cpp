#include "stkrl/kg_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stkrl/error.hpp"

namespace stkrl {

std::int32_t IdTable::intern(const std::string& name) {
  auto [it, inserted] = ids_.try_emplace(name, static_cast<std::int32_t>(names_.size()));
  if (inserted) names_.push_back(name);
  return it->second;
}

std::optional<std::int32_t> IdTable::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::vector<Triple>& KnowledgeGraph::split(Split s) const {
  switch (s) {
    case Split::Train: return train;
    case Split::Valid: return valid;
    case Split::Test: return test;
  }
  return train;
}

std::vector<Triple>& KnowledgeGraph::split(Split s) {
  return const_cast<std::vector<Triple>&>(std::as_const(*this).split(s));
}

bool KnowledgeGraph::valid_ids(const Triple& t) const {
  const auto ne = static_cast<EntityId>(entities.size());
  const auto nr = static_cast<RelationId>(relations.size());
  return t.head >= 0 && t.head < ne && t.tail >= 0 && t.tail < ne && t.relation >= 0 &&
         t.relation < nr;
}

bool KnowledgeGraph::add(Split s, const Triple& t) {
  if (!valid_ids(t)) throw VocabularyError("triple references an id outside the tables");
  if (all_true.contains(t)) {
    const auto& own = split(s);
    if (std::find(own.begin(), own.end(), t) != own.end()) return false;
    throw DataError("triple (" + entities.name(t.head) + ", " + relations.name(t.relation) +
                    ", " + entities.name(t.tail) + ") appears in more than one split");
  }
  all_true.insert(t);
  if (s == Split::Train) train_set.insert(t);
  split(s).push_back(t);
  return true;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

}  // namespace

void load_triples(std::istream& in, KnowledgeGraph& kg, Split split) {
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = strip_cr(raw);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw ParseError("expected head<TAB>relation<TAB>tail", line_no);
    }
    Triple t;
    if (split == Split::Train) {
      t.head = kg.entities.intern(std::string(fields[0]));
      t.relation = kg.relations.intern(std::string(fields[1]));
      t.tail = kg.entities.intern(std::string(fields[2]));
    } else {
      auto lookup = [&](const IdTable& table, std::string_view name, const char* what) {
        auto id = table.find(name);
        if (!id) {
          throw VocabularyError("line " + std::to_string(line_no) + ": unknown " + what + " '" +
                                std::string(name) + "'");
        }
        return *id;
      };
      t.head = lookup(kg.entities, fields[0], "entity");
      t.relation = lookup(kg.relations, fields[1], "relation");
      t.tail = lookup(kg.entities, fields[2], "entity");
    }
    kg.add(split, t);
  }
}

void load_triples(const std::string& path, KnowledgeGraph& kg, Split split) {
  auto in = open_input(path);
  load_triples(in, kg, split);
}

void write_triples(std::ostream& out, const KnowledgeGraph& kg, Split split) {
  for (const auto& t : kg.split(split)) {
    out << kg.entities.name(t.head) << '\t' << kg.relations.name(t.relation) << '\t'
        << kg.entities.name(t.tail) << '\n';
  }
}

std::vector<int> compute_position_ids(std::size_t n, std::size_t anchor, int d) {
  if (anchor >= n) {
    throw ArgumentError("anchor " + std::to_string(anchor) + " out of range for length " +
                        std::to_string(n));
  }
  if (d < 1) throw ArgumentError("clip distance must be at least 1");
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto rel = static_cast<long long>(i) - static_cast<long long>(anchor);
    out[i] = static_cast<int>(std::clamp<long long>(rel, -d, d));
  }
  return out;
}

std::span<const ReferenceSentence> ReferenceCorpus::of(EntityId e) const {
  auto it = sentences.find(e);
  if (it == sentences.end()) return {};
  return it->second;
}

std::size_t ReferenceCorpus::total_sentences() const {
  std::size_t n = 0;
  for (const auto& [e, list] : sentences) n += list.size();
  return n;
}

std::string ReferenceCorpus::text(const ReferenceSentence& s) const {
  std::string out;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    if (i) out += ' ';
    out += words.name(s.tokens[i]);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

std::vector<std::string> name_words(std::string_view name) {
  std::string spaced(name);
  std::replace(spaced.begin(), spaced.end(), '_', ' ');
  return tokenize(spaced);
}

// Turns per-entity token strings into a corpus, assigning word ids in
// (entity, sentence, token) order so that a written and re-read cache gets
// identical ids.
struct RawSentence {
  std::vector<std::string> tokens;
  std::size_t anchor = 0;
};

ReferenceCorpus assemble_corpus(const std::map<EntityId, std::vector<RawSentence>>& raw,
                                std::size_t cap, int d) {
  ReferenceCorpus corpus;
  corpus.cap = cap;
  corpus.clip_d = d;
  for (const auto& [e, list] : raw) {
    auto& out = corpus.sentences[e];
    for (const auto& rs : list) {
      if (out.size() >= cap) break;
      ReferenceSentence s;
      s.entity = e;
      s.anchor = rs.anchor;
      s.tokens.reserve(rs.tokens.size());
      for (const auto& tok : rs.tokens) s.tokens.push_back(corpus.words.intern(tok));
      s.position_ids = compute_position_ids(s.tokens.size(), s.anchor, d);
      out.push_back(std::move(s));
    }
  }
  return corpus;
}

}  // namespace

std::string entity_token(std::string_view name) {
  const auto words = name_words(name);
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += '_';
    out += words[i];
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    const auto b = cur.find_first_not_of(" \t\r\n\f\v");
    if (b != std::string::npos) {
      const auto e = cur.find_last_not_of(" \t\r\n\f\v");
      out.push_back(cur.substr(b, e - b + 1));
    }
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    const bool terminator = ch == '.' || ch == '!' || ch == '?';
    const bool boundary =
        i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]));
    if (terminator && boundary) {
      flush();
    } else {
      cur += ch;
    }
  }
  flush();
  return out;
}

ReferenceCorpus extract_reference_sentences(std::string_view text, const KnowledgeGraph& kg,
                                            std::size_t cap, int d) {
  struct Name {
    std::vector<std::string> words;
    std::vector<EntityId> entities;
  };
  // First word -> candidate names, longest first.
  std::unordered_map<std::string, std::vector<Name>> by_first;
  {
    std::map<std::vector<std::string>, std::vector<EntityId>> grouped;
    for (std::size_t e = 0; e < kg.entities.size(); ++e) {
      auto words = name_words(kg.entities.name(static_cast<EntityId>(e)));
      if (!words.empty()) grouped[std::move(words)].push_back(static_cast<EntityId>(e));
    }
    for (auto& [words, ids] : grouped) by_first[words.front()].push_back({words, ids});
    for (auto& [first, names] : by_first) {
      std::stable_sort(names.begin(), names.end(), [](const Name& a, const Name& b) {
        return a.words.size() > b.words.size();
      });
    }
  }

  std::map<EntityId, std::vector<RawSentence>> raw;
  for (const auto& sentence : split_sentences(text)) {
    const auto tokens = tokenize(sentence);
    std::vector<std::string> collapsed;
    std::map<EntityId, std::size_t> anchors;  // first occurrence
    std::size_t i = 0;
    while (i < tokens.size()) {
      const Name* match = nullptr;
      if (auto it = by_first.find(tokens[i]); it != by_first.end()) {
        for (const auto& cand : it->second) {
          if (i + cand.words.size() > tokens.size()) continue;
          if (std::equal(cand.words.begin(), cand.words.end(), tokens.begin() + i)) {
            match = &cand;
            break;
          }
        }
      }
      if (match) {
        std::string tok;
        for (std::size_t w = 0; w < match->words.size(); ++w) {
          if (w) tok += '_';
          tok += match->words[w];
        }
        for (EntityId e : match->entities) anchors.try_emplace(e, collapsed.size());
        collapsed.push_back(std::move(tok));
        i += match->words.size();
      } else {
        collapsed.push_back(tokens[i]);
        ++i;
      }
    }
    for (const auto& [e, anchor] : anchors) {
      auto& list = raw[e];
      if (list.size() < cap) list.push_back({collapsed, anchor});
    }
  }
  return assemble_corpus(raw, cap, d);
}

ReferenceCorpus extract_reference_sentences(std::istream& in, const KnowledgeGraph& kg,
                                            std::size_t cap, int d) {
  std::stringstream buf;
  buf << in.rdbuf();
  return extract_reference_sentences(buf.str(), kg, cap, d);
}

void write_corpus(std::ostream& out, const ReferenceCorpus& corpus) {
  for (const auto& [e, list] : corpus.sentences) {
    for (const auto& s : list) out << e << '\t' << s.anchor << '\t' << corpus.text(s) << '\n';
  }
}

namespace {

template <class T>
bool parse_number(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

ReferenceCorpus read_corpus(std::istream& in, const KnowledgeGraph& kg, std::size_t cap, int d) {
  std::map<EntityId, std::vector<RawSentence>> raw;
  std::string line_buf;
  std::size_t line_no = 0;
  while (std::getline(in, line_buf)) {
    ++line_no;
    const auto line = strip_cr(line_buf);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) throw ParseError("expected entity_id<TAB>anchor<TAB>tokens", line_no);
    EntityId e = 0;
    std::size_t anchor = 0;
    if (!parse_number(fields[0], e) || e < 0 || static_cast<std::size_t>(e) >= kg.entities.size()) {
      throw ParseError("bad entity id '" + std::string(fields[0]) + "'", line_no);
    }
    if (!parse_number(fields[1], anchor)) {
      throw ParseError("bad anchor '" + std::string(fields[1]) + "'", line_no);
    }
    RawSentence rs;
    rs.tokens = tokenize(fields[2]);
    rs.anchor = anchor;
    if (rs.tokens.empty()) throw ParseError("empty sentence", line_no);
    if (anchor >= rs.tokens.size()) throw ParseError("anchor outside sentence", line_no);
    if (rs.tokens[anchor] != entity_token(kg.entities.name(e))) {
      throw ParseError("anchor token is not the entity name", line_no);
    }
    raw[e].push_back(std::move(rs));
  }
  return assemble_corpus(raw, cap, d);
}

ReferenceCorpus read_corpus(const std::string& path, const KnowledgeGraph& kg, std::size_t cap,
                            int d) {
  auto in = open_input(path);
  return read_corpus(in, kg, cap, d);
}

WordFeatureTable random_word_vectors(std::size_t n_words, std::size_t k_w, Rng& rng) {
  WordFeatureTable table;
  table.vectors = Matrix(n_words, k_w);
  table.loaded.assign(n_words, false);
  const double bound = 6.0 / std::sqrt(static_cast<double>(k_w));
  for (double& x : table.vectors.values()) x = rng.uniform(-bound, bound);
  return table;
}

WordFeatureTable load_word_vectors(std::istream& in, const IdTable& vocab, std::size_t k_w,
                                   Rng& rng) {
  std::unordered_map<std::string, Vec> found;
  std::string line_buf;
  std::size_t line_no = 0;
  while (std::getline(in, line_buf)) {
    ++line_no;
    std::istringstream fields{std::string(strip_cr(line_buf))};
    std::vector<std::string> parts;
    for (std::string p; fields >> p;) parts.push_back(std::move(p));
    if (parts.empty()) continue;
    if (line_no == 1 && parts.size() == 2) {
      std::size_t count = 0;
      std::size_t dim = 0;
      if (parse_number<std::size_t>(parts[0], count) && parse_number<std::size_t>(parts[1], dim)) {
        if (dim != k_w) {
          throw FormatError("line 1: header dimension " + parts[1] + " != " + std::to_string(k_w));
        }
        continue;
      }
    }
    if (parts.size() != k_w + 1) {
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(k_w) +
                        " values, got " + std::to_string(parts.size() - 1));
    }
    Vec v(k_w);
    for (std::size_t i = 0; i < k_w; ++i) {
      if (!parse_number(parts[i + 1], v[i]) || !std::isfinite(v[i])) {
        throw FormatError("line " + std::to_string(line_no) + ": bad value '" + parts[i + 1] + "'");
      }
    }
    if (vocab.find(parts[0])) found.insert_or_assign(parts[0], std::move(v));
  }

  WordFeatureTable table;
  table.vectors = Matrix(vocab.size(), k_w);
  table.loaded.assign(vocab.size(), false);
  const double bound = 6.0 / std::sqrt(static_cast<double>(k_w));
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    auto row = table.vectors.row(w);
    if (auto it = found.find(vocab.name(static_cast<WordId>(w))); it != found.end()) {
      std::copy(it->second.begin(), it->second.end(), row.begin());
      table.loaded[w] = true;
    } else {
      for (double& x : row) x = rng.uniform(-bound, bound);
    }
  }
  return table;
}

WordFeatureTable load_word_vectors(const std::string& path, const IdTable& vocab,
                                   std::size_t k_w, Rng& rng) {
  auto in = open_input(path);
  return load_word_vectors(in, vocab, k_w, rng);
}

SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed,
                                            std::size_t cap, int d) {
  if (spec.n_entities == 0 || spec.n_relations == 0 || spec.n_triples == 0 ||
      spec.sentence_length == 0 || spec.vocab_size == 0 || spec.n_types == 0) {
    throw ArgumentError("synthetic spec counts must be positive");
  }
  if (spec.n_types > spec.n_entities) throw ArgumentError("more entity types than entities");

  const std::size_t n = spec.n_entities;
  const std::size_t n_types = spec.n_types;
  std::vector<std::vector<EntityId>> members(n_types);
  SyntheticDataset out;
  out.entity_type.resize(n);
  for (std::size_t e = 0; e < n; ++e) {
    out.entity_type[e] = e % n_types;
    members[e % n_types].push_back(static_cast<EntityId>(e));
  }
  auto target_type = [&](std::size_t type, std::size_t r) {
    return n_types == 1 ? 0 : (type + r + 1) % n_types;
  };

  std::size_t capacity = 0;
  for (std::size_t r = 0; r < spec.n_relations; ++r) {
    for (std::size_t a = 0; a < n_types; ++a) {
      capacity += members[a].size() * members[target_type(a, r)].size();
    }
  }
  if (spec.n_triples > capacity) {
    throw DataError("cannot place " + std::to_string(spec.n_triples) + " distinct triples; only " +
                    std::to_string(capacity) + " are possible");
  }

  Rng rng(derive_seed(seed, seed_offset::kSynthetic));
  std::vector<Triple> triples;
  if (spec.n_triples * 2 > capacity) {
    for (std::size_t r = 0; r < spec.n_relations; ++r) {
      for (std::size_t h = 0; h < n; ++h) {
        for (EntityId t : members[target_type(out.entity_type[h], r)]) {
          triples.push_back({static_cast<EntityId>(h), static_cast<RelationId>(r), t});
        }
      }
    }
    rng.shuffle(triples);
    triples.resize(spec.n_triples);
  } else {
    TripleSet seen;
    while (triples.size() < spec.n_triples) {
      const auto r = rng.below(spec.n_relations);
      const auto h = rng.below(n);
      const auto& pool = members[target_type(out.entity_type[h], r)];
      const Triple t{static_cast<EntityId>(h), static_cast<RelationId>(r),
                     pool[rng.below(pool.size())]};
      if (seen.insert(t).second) triples.push_back(t);
    }
  }

  auto& kg = out.kg;
  for (std::size_t e = 0; e < n; ++e) kg.entities.intern("e" + std::to_string(e));
  for (std::size_t r = 0; r < spec.n_relations; ++r) kg.relations.intern("r" + std::to_string(r));
  const std::size_t n_valid = spec.n_triples / 10;
  const std::size_t n_test = spec.n_triples / 10;
  const std::size_t n_train = spec.n_triples - n_valid - n_test;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const Split s = i < n_train ? Split::Train : (i < n_train + n_valid ? Split::Valid : Split::Test);
    kg.add(s, triples[i]);
  }

  // Neighborhood descriptors over the full triple set, in sorted order.
  std::vector<std::vector<std::string>> hood(n);
  {
    auto sorted = triples;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& t : sorted) {
      hood[t.head].push_back("r" + std::to_string(t.relation));
      hood[t.head].push_back("e" + std::to_string(t.tail));
      hood[t.tail].push_back("r" + std::to_string(t.relation) + "_inv");
      hood[t.tail].push_back("e" + std::to_string(t.head));
    }
  }

  const std::size_t len = spec.sentence_length;
  auto noise_word = [&](std::uint64_t i) { return "w" + std::to_string(i % spec.vocab_size); };
  std::map<EntityId, std::vector<RawSentence>> raw;
  for (std::size_t e = 0; e < n; ++e) {
    const std::string name = "e" + std::to_string(e);
    std::vector<std::pair<RawSentence, bool>> list;
    const std::string type_word = "t" + std::to_string(out.entity_type[e]);
    for (std::size_t j = 0; j < spec.signal_sentences_per_entity; ++j) {
      RawSentence s;
      s.anchor = rng.below(len);
      std::size_t cursor = j * (len - 1);
      for (std::size_t i = 0; i < len; ++i) {
        if (i == s.anchor) {
          s.tokens.push_back(name);
        } else if (n_types > 1 && i == (s.anchor + 1) % len) {
          s.tokens.push_back(type_word);
        } else if (!hood[e].empty()) {
          s.tokens.push_back(hood[e][cursor++ % hood[e].size()]);
        } else {
          s.tokens.push_back(noise_word(e * 7919 + j * 104729 + i));
        }
      }
      list.emplace_back(std::move(s), true);
    }
    for (std::size_t j = 0; j < spec.noise_sentences_per_entity; ++j) {
      RawSentence s;
      s.anchor = rng.below(len);
      for (std::size_t i = 0; i < len; ++i) {
        s.tokens.push_back(i == s.anchor ? name : noise_word(rng.below(spec.vocab_size)));
      }
      list.emplace_back(std::move(s), false);
    }
    rng.shuffle(list);
    auto& flags = out.is_signal[static_cast<EntityId>(e)];
    auto& sentences = raw[static_cast<EntityId>(e)];
    for (auto& [s, signal] : list) {
      if (sentences.size() >= cap) break;
      sentences.push_back(std::move(s));
      flags.push_back(signal);
    }
  }
  out.corpus = assemble_corpus(raw, cap, d);
  return out;
}

}  // namespace stkrl
