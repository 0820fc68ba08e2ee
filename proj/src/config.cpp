#include "stkrl/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "stkrl/error.hpp"

namespace stkrl {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [p, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || p != end || value.empty()) {
    throw ConfigError(key, "cannot parse '" + value + "' as a number");
  }
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  if (!value.empty() && value[0] == '-') throw ConfigError(key, "must be non-negative");
  return parse_number<std::size_t>(key, value);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError(key, "expected a boolean, got '" + value + "'");
}

template <class E, std::size_t N>
E parse_choice(const std::string& key, const std::string& value,
               const std::pair<const char*, E> (&choices)[N]) {
  std::string names;
  for (const auto& [name, v] : choices) {
    if (value == name) return v;
    names += names.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError(key, "expected one of {" + names + "}, got '" + value + "'");
}

std::string format_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

struct Entry {
  const char* key;
  std::function<void(CliConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const CliConfig&)> get;
};

#define STKRL_COUNT(name, field)                                                          \
  Entry {                                                                                 \
    name, [](CliConfig& c, const std::string& k, const std::string& v) {                  \
      c.field = parse_count(k, v);                                                        \
    },                                                                                    \
        [](const CliConfig& c) { return std::to_string(c.field); }                        \
  }
#define STKRL_REAL(name, field)                                                           \
  Entry {                                                                                 \
    name, [](CliConfig& c, const std::string& k, const std::string& v) {                  \
      c.field = parse_number<double>(k, v);                                               \
    },                                                                                    \
        [](const CliConfig& c) { return format_double(c.field); }                         \
  }
#define STKRL_PATH(name, field)                                                                \
  Entry {                                                                                      \
    name, [](CliConfig& c, const std::string&, const std::string& v) { c.field = v; },         \
        [](const CliConfig& c) { return c.field; }                                             \
  }

constexpr std::pair<const char*, NormKind> kNorms[] = {{"l1", NormKind::L1}, {"l2", NormKind::L2}};
constexpr std::pair<const char*, EncoderKind> kEncoders[] = {
    {"rnn", EncoderKind::Rnn}, {"rnn-pool", EncoderKind::RnnPool}, {"lstm", EncoderKind::Lstm}};
constexpr std::pair<const char*, AggregationMode> kAggregations[] = {
    {"top-m", AggregationMode::Attention}, {"mean", AggregationMode::Mean}};
constexpr std::pair<const char*, LossMode> kLossModes[] = {{"four-hinges", LossMode::FourHinges},
                                                           {"summed", LossMode::Summed}};
constexpr std::pair<const char*, EnergyMode> kEnergyModes[] = {
    {"full", EnergyMode::Full}, {"transE-only", EnergyMode::TransEOnly}};
constexpr std::pair<const char*, AttentionGrad> kAttentionGrads[] = {{"stop", AttentionGrad::Stop},
                                                                     {"full", AttentionGrad::Full}};
constexpr std::pair<const char*, LpRankMode> kRankModes[] = {{"rank-mean", LpRankMode::RankMean},
                                                             {"score-mean", LpRankMode::ScoreMean}};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      STKRL_COUNT("dim", train.hp.k),
      STKRL_COUNT("word_dim", train.hp.k_w),
      STKRL_COUNT("position_dim", train.hp.k_p),
      Entry{"clip_d",
            [](CliConfig& c, const std::string& k, const std::string& v) {
              c.train.hp.d = parse_number<int>(k, v);
            },
            [](const CliConfig& c) { return std::to_string(c.train.hp.d); }},
      STKRL_COUNT("top_m", train.hp.m),
      STKRL_REAL("margin", train.hp.margin),
      Entry{"norm",
            [](CliConfig& c, const std::string& k, const std::string& v) {
              c.train.hp.norm = parse_choice(k, v, kNorms);
            },
            [](const CliConfig& c) { return to_string(c.train.hp.norm); }},
      STKRL_REAL("learning_rate", train.hp.learning_rate),
      STKRL_COUNT("batch_size", train.hp.batch_size),
      STKRL_COUNT("epochs", train.hp.epochs),
      STKRL_REAL("epsilon", train.hp.epsilon),
      Entry{"seed",
            [](CliConfig& c, const std::string& k, const std::string& v) {
              c.train.hp.seed = parse_number<std::uint64_t>(k, v);
            },
            [](const CliConfig& c) { return std::to_string(c.train.hp.seed); }},
      Entry{"energy_mode",
            [](CliConfig& c, const std::string& k, const std::string& v) {
              c.train.hp.energy_mode = parse_choice(k, v, kEnergyModes);
            },
            [](const CliConfig& c) { return to_string(c.train.hp.energy_mode); }},
      Entry{"loss_mode",
            [](CliConfig& c, const std::string& k, const std::string& v) {
              c.train.hp.loss_mode = parse_choice(k, v, kLossModes);
            },
            [](const CliConfig& c) { return to_string(c.train.hp.loss_mode); }},
      Entry{"encoder",
            [](CliConfig& c, const std::string& k, const std::string& v) {
              c.train.hp.encoder = parse_choice(k, v, kEncoders);
            },
            [](const CliConfig& c) { return to_string(c.train.hp.encoder); }},
      Entry{"attention",
            [](CliConfig& c, const std::string& k, const std::string& v) {
              c.train.hp.aggregation = parse_choice(k, v, kAggregations);
            },
            [](const CliConfig& c) { return to_string(c.train.hp.aggregation); }},
      Entry{"attention_grad",
            [](CliConfig& c, const std::string& k, const std::string& v) {
              c.train.hp.attention_grad = parse_choice(k, v, kAttentionGrads);
            },
            [](const CliConfig& c) { return to_string(c.train.hp.attention_grad); }},
      STKRL_PATH("warm_start", train.warm_start),
      STKRL_PATH("word_vectors", train.word_vectors),
      Entry{"deterministic",
            [](CliConfig& c, const std::string& k, const std::string& v) {
              c.train.deterministic = parse_bool(k, v);
            },
            [](const CliConfig& c) { return std::string(c.train.deterministic ? "true" : "false"); }},
      STKRL_COUNT("validation_interval", train.validation_interval),
      STKRL_COUNT("patience", train.patience),
      STKRL_COUNT("validation_sample", train.validation_sample),
      STKRL_COUNT("threads", train.threads),
      STKRL_COUNT("sentence_cap", sentence_cap),
      Entry{"lp_mode",
            [](CliConfig& c, const std::string& k, const std::string& v) {
              c.lp_mode = parse_choice(k, v, kRankModes);
            },
            [](const CliConfig& c) { return to_string(c.lp_mode); }},
      STKRL_COUNT("synth_entities", synth.n_entities),
      STKRL_COUNT("synth_relations", synth.n_relations),
      STKRL_COUNT("synth_triples", synth.n_triples),
      STKRL_COUNT("synth_signal", synth.signal_sentences_per_entity),
      STKRL_COUNT("synth_noise", synth.noise_sentences_per_entity),
      STKRL_COUNT("synth_sentence_length", synth.sentence_length),
      STKRL_COUNT("synth_vocab", synth.vocab_size),
      STKRL_COUNT("synth_types", synth.n_types),
      STKRL_COUNT("gradcheck_coords", gradcheck_coords),
      STKRL_PATH("train", train_path),
      STKRL_PATH("valid", valid_path),
      STKRL_PATH("test", test_path),
      STKRL_PATH("corpus", corpus_path),
      STKRL_PATH("text", text_path),
      STKRL_PATH("checkpoint", checkpoint),
      STKRL_PATH("model", model),
      STKRL_PATH("report", report),
      STKRL_PATH("out_dir", out_dir),
      STKRL_PATH("entity", entity),
  };
  return table;
}

#undef STKRL_COUNT
#undef STKRL_REAL
#undef STKRL_PATH

}  // namespace

std::string normalize_key(std::string key) {
  for (char& ch : key) {
    ch = ch == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return key;
}

void set_config_value(CliConfig& config, const std::string& key, const std::string& value) {
  const std::string k = normalize_key(trim(key));
  for (const auto& e : entries()) {
    if (k == e.key) {
      e.set(config, k, trim(value));
      return;
    }
  }
  throw ConfigError(k, "unknown configuration key");
}

void apply_config_file(CliConfig& config, std::istream& in) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(number), "expected 'key = value'");
    }
    set_config_value(config, line.substr(0, eq), line.substr(eq + 1));
  }
}

void apply_config_file(CliConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  apply_config_file(config, in);
}

std::vector<std::pair<std::string, std::string>> config_entries(const CliConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : entries()) out.emplace_back(e.key, e.get(config));
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.emplace_back(e.key);
  return out;
}

CliConfig resolve_config(const std::string& file,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
  CliConfig config;
  std::string path = file;
  if (path.empty()) {
    if (const char* env = std::getenv("STKRL_CONFIG"); env && *env) path = env;
  }
  if (!path.empty()) apply_config_file(config, path);
  for (const auto& [k, v] : overrides) set_config_value(config, k, v);
  config.train.validate();
  return config;
}

}  // namespace stkrl
