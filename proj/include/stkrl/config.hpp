#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "stkrl/evaluator.hpp"
#include "stkrl/kg_data.hpp"
#include "stkrl/trainer.hpp"

namespace stkrl {

// Everything a command can read, fully resolved. Paths have no default.
struct CliConfig {
  TrainConfig train;

  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::string corpus_path;  // corpus cache; output of `extract`, input elsewhere
  std::string text_path;    // raw text for `extract`
  std::string checkpoint;   // output of `train`
  std::string model;        // input of the evaluation commands
  std::string report;       // JSON report
  std::string out_dir;      // output directory of `synth`
  std::string entity;       // optional filter for `rank-sentences`

  std::size_t sentence_cap = 40;
  LpRankMode lp_mode = LpRankMode::RankMean;
  SyntheticSpec synth;
  std::size_t gradcheck_coords = 200;
};

// Lowercases and maps '-' to '_'.
std::string normalize_key(std::string key);

// Throws ConfigError naming the key for unknown keys and unparsable values.
void set_config_value(CliConfig& config, const std::string& key, const std::string& value);

// `key = value` lines; '#' starts a comment. Throws ConfigError.
void apply_config_file(CliConfig& config, std::istream& in);
void apply_config_file(CliConfig& config, const std::string& path);

// Resolved (key, value) pairs in a fixed order, paths included.
std::vector<std::pair<std::string, std::string>> config_entries(const CliConfig& config);

std::vector<std::string> config_keys();

// Applies file (explicit path, else $STKRL_CONFIG when set) then overrides,
// and validates the hyperparameters.
CliConfig resolve_config(const std::string& file,
                         const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace stkrl
