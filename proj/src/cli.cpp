#include "stkrl/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stkrl/config.hpp"
#include "stkrl/error.hpp"
#include "stkrl/evaluator.hpp"
#include "stkrl/kg_data.hpp"
#include "stkrl/model.hpp"
#include "stkrl/trainer.hpp"

namespace stkrl {

namespace {

using nlohmann::json;

struct Context {
  CliConfig config;
  std::ostream& out;
  std::ostream& err;
};

const std::string& require(const std::string& value, const char* key, const char* command) {
  if (value.empty()) throw ConfigError(key, std::string("path required by ") + command);
  return value;
}

KnowledgeGraph load_kg(const CliConfig& c, const char* command) {
  KnowledgeGraph kg;
  load_triples(require(c.train_path, "train", command), kg, Split::Train);
  if (!c.valid_path.empty()) load_triples(c.valid_path, kg, Split::Valid);
  if (!c.test_path.empty()) load_triples(c.test_path, kg, Split::Test);
  return kg;
}

ReferenceCorpus load_corpus(const Context& ctx, const KnowledgeGraph& kg) {
  const auto& c = ctx.config;
  if (!c.corpus_path.empty()) return read_corpus(c.corpus_path, kg, c.sentence_cap, c.train.hp.d);
  if (!c.text_path.empty()) {
    std::ifstream in(c.text_path);
    if (!in) throw DataError("cannot open " + c.text_path);
    return extract_reference_sentences(in, kg, c.sentence_cap, c.train.hp.d);
  }
  ctx.err << "warning: no corpus given; every entity uses its structure embedding as text\n";
  ReferenceCorpus corpus;
  corpus.cap = c.sentence_cap;
  corpus.clip_d = c.train.hp.d;
  return corpus;
}

ModelParams load_model(const Context& ctx, const KnowledgeGraph& kg, const char* command) {
  ModelParams p = load_checkpoint(require(ctx.config.model, "model", command));
  if (p.entities.rows() != kg.entities.size() || p.relations.rows() != kg.relations.size()) {
    throw DataError("checkpoint has " + std::to_string(p.entities.rows()) + " entities and " +
                    std::to_string(p.relations.rows()) + " relations, triples define " +
                    std::to_string(kg.entities.size()) + " and " +
                    std::to_string(kg.relations.size()));
  }
  return p;
}

void write_report(const CliConfig& c, json report) {
  if (c.report.empty()) return;
  json cfg = json::object();
  for (const auto& [k, v] : config_entries(c)) cfg[k] = v;
  report["config"] = cfg;
  std::ofstream out(c.report, std::ios::trunc);
  if (!out) throw DataError("cannot open " + c.report + " for writing");
  out << report.dump(2) << '\n';
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

int cmd_extract(Context& ctx) {
  const auto& c = ctx.config;
  const KnowledgeGraph kg = load_kg(c, "extract");
  std::ifstream in(require(c.text_path, "text", "extract"));
  if (!in) throw DataError("cannot open " + c.text_path);
  const ReferenceCorpus corpus = extract_reference_sentences(in, kg, c.sentence_cap, c.train.hp.d);
  std::ofstream out(require(c.corpus_path, "corpus", "extract"), std::ios::trunc);
  if (!out) throw DataError("cannot open " + c.corpus_path + " for writing");
  write_corpus(out, corpus);
  ctx.out << "entities_with_sentences\tsentences\tvocabulary\n"
          << corpus.sentences.size() << '\t' << corpus.total_sentences() << '\t'
          << corpus.words.size() << '\n';
  write_report(c, {{"command", "extract"},
                   {"entities_with_sentences", corpus.sentences.size()},
                   {"sentences", corpus.total_sentences()},
                   {"vocabulary", corpus.words.size()}});
  return kExitOk;
}

int cmd_synth(Context& ctx) {
  const auto& c = ctx.config;
  namespace fs = std::filesystem;
  const fs::path dir = require(c.out_dir, "out_dir", "synth");
  fs::create_directories(dir);
  const auto data = generate_synthetic_dataset(c.synth, c.train.hp.seed, c.sentence_cap, c.train.hp.d);

  auto write = [&](const char* name, Split s) {
    std::ofstream out(dir / name, std::ios::trunc);
    if (!out) throw DataError("cannot open " + (dir / name).string() + " for writing");
    write_triples(out, data.kg, s);
  };
  write("train.tsv", Split::Train);
  write("valid.tsv", Split::Valid);
  write("test.tsv", Split::Test);

  // Entity ids in the corpus file follow the order of the reloaded triples.
  KnowledgeGraph reloaded;
  load_triples((dir / "train.tsv").string(), reloaded, Split::Train);
  ReferenceCorpus corpus;
  corpus.words = data.corpus.words;
  corpus.cap = data.corpus.cap;
  corpus.clip_d = data.corpus.clip_d;
  std::ofstream signal(dir / "signal.tsv", std::ios::trunc);
  std::size_t dropped = 0;
  for (const auto& [e, sentences] : data.corpus.sentences) {
    const auto& name = data.kg.entities.name(e);
    const auto id = reloaded.entities.find(name);
    if (!id) {
      ++dropped;
      continue;
    }
    auto& target = corpus.sentences[*id];
    for (auto s : sentences) {
      s.entity = *id;
      target.push_back(std::move(s));
    }
    const auto& flags = data.is_signal.at(e);
    for (std::size_t i = 0; i < flags.size(); ++i) {
      signal << name << '\t' << i << '\t' << (flags[i] ? 1 : 0) << '\n';
    }
  }
  if (dropped) ctx.err << "warning: " << dropped << " entities without training triples dropped\n";
  {
    std::ofstream out(dir / "corpus.tsv", std::ios::trunc);
    write_corpus(out, corpus);
  }
  ctx.out << "file\tlines\n"
          << "train.tsv\t" << data.kg.train.size() << '\n'
          << "valid.tsv\t" << data.kg.valid.size() << '\n'
          << "test.tsv\t" << data.kg.test.size() << '\n'
          << "corpus.tsv\t" << corpus.total_sentences() << '\n';
  write_report(c, {{"command", "synth"},
                   {"train", data.kg.train.size()},
                   {"valid", data.kg.valid.size()},
                   {"test", data.kg.test.size()},
                   {"sentences", corpus.total_sentences()}});
  return kExitOk;
}

int cmd_train(Context& ctx) {
  const auto& c = ctx.config;
  const std::string& checkpoint = require(c.checkpoint, "checkpoint", "train");
  const KnowledgeGraph kg = load_kg(c, "train");
  const ReferenceCorpus corpus = load_corpus(ctx, kg);
  ctx.err << "training on " << kg.train.size() << " triples, " << kg.entities.size()
          << " entities, " << corpus.total_sentences() << " sentences\n";
  ctx.out << "epoch\tloss\tval_hits10\tseconds\n";
  json log = json::array();
  TrainResult result;
  try {
    result = train(c.train, kg, corpus, {}, [&](const TrainLogEntry& e) {
      ctx.out << e.epoch << '\t' << fmt(e.loss) << '\t' << fmt(e.val_hits10) << '\t'
              << std::fixed << std::setprecision(3) << e.seconds << std::defaultfloat << '\n';
      ctx.out.flush();
      log.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"val_hits10", e.val_hits10}});
    });
  } catch (const TrainingError& e) {
    if (e.last_good()) {
      save_checkpoint(*e.last_good(), checkpoint + ".last_good");
      ctx.err << "last parameters saved to " << checkpoint << ".last_good\n";
    }
    throw;
  }
  save_checkpoint(result.params, checkpoint);
  ctx.err << "best epoch " << result.best_epoch << (result.stopped_early ? " (stopped early)" : "")
          << ", checkpoint written to " << checkpoint << '\n';
  write_report(c, {{"command", "train"},
                   {"log", log},
                   {"best_epoch", result.best_epoch},
                   {"stopped_early", result.stopped_early}});
  return kExitOk;
}

int cmd_eval_tc(Context& ctx) {
  const auto& c = ctx.config;
  const KnowledgeGraph kg = load_kg(c, "eval-tc");
  require(c.valid_path, "valid", "eval-tc");
  require(c.test_path, "test", "eval-tc");
  const ReferenceCorpus corpus = load_corpus(ctx, kg);
  const ModelParams params = load_model(ctx, kg, "eval-tc");
  const EmbeddingView view = make_view(params, corpus, c.train.threads);
  const TcReport r = evaluate_triple_classification(view, kg, c.train.hp.seed);
  if (r.relations_without_validation) {
    ctx.err << "warning: " << r.relations_without_validation
            << " relations have no validation instances; using the global threshold\n";
  }
  ctx.out << "split\tinstances\taccuracy\n"
          << "test\t" << r.test_instances << '\t' << fmt(r.test_accuracy) << '\n';
  json thresholds = json::object();
  for (const auto& [rel, delta] : r.thresholds.per_relation) {
    thresholds[kg.relations.name(rel)] = delta;
  }
  write_report(c, {{"command", "eval-tc"},
                   {"test_accuracy", r.test_accuracy},
                   {"valid_accuracy", r.valid_accuracy},
                   {"test_instances", r.test_instances},
                   {"valid_instances", r.valid_instances},
                   {"global_threshold", r.thresholds.global},
                   {"thresholds", thresholds}});
  return kExitOk;
}

int cmd_eval_lp(Context& ctx) {
  const auto& c = ctx.config;
  const KnowledgeGraph kg = load_kg(c, "eval-lp");
  require(c.test_path, "test", "eval-lp");
  const ReferenceCorpus corpus = load_corpus(ctx, kg);
  const ModelParams params = load_model(ctx, kg, "eval-lp");
  const EmbeddingView view = make_view(params, corpus, c.train.threads);
  LpOptions options;
  options.mode = c.lp_mode;
  options.threads = c.train.threads;
  options.keep_details = !c.report.empty();
  const LpResult r = link_prediction(kg.test, view, kg, options);

  ctx.out << "side\tcategory\tcount\tmean_rank_raw\tmean_rank_filter\thits10_raw\thits10_filter\n";
  ctx.out << "all\tall\t" << r.predictions << '\t' << fmt(r.mean_rank_raw) << '\t'
          << fmt(r.mean_rank_filter) << '\t' << fmt(r.hits10_raw) << '\t' << fmt(r.hits10_filter)
          << '\n';
  json cells = json::array();
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t k = 0; k < 4; ++k) {
      const auto& cell = r.categories[s][k];
      const char* side = s == 0 ? "head" : "tail";
      const auto cat = to_string(kAllCategories[k]);
      ctx.out << side << '\t' << cat << '\t' << cell.count << '\t' << fmt(cell.mean_rank_raw)
              << '\t' << fmt(cell.mean_rank_filter) << '\t' << fmt(cell.hits10_raw) << '\t'
              << fmt(cell.hits10_filter) << '\n';
      cells.push_back({{"side", side},
                       {"category", cat},
                       {"count", cell.count},
                       {"mean_rank_raw", cell.mean_rank_raw},
                       {"mean_rank_filter", cell.mean_rank_filter},
                       {"hits10_raw", cell.hits10_raw},
                       {"hits10_filter", cell.hits10_filter}});
    }
  }
  json details = json::array();
  for (const auto& p : r.details) {
    const Triple& t = kg.test[p.triple_index];
    details.push_back({{"head", kg.entities.name(t.head)},
                       {"relation", kg.relations.name(t.relation)},
                       {"tail", kg.entities.name(t.tail)},
                       {"side", p.side == Side::Head ? "head" : "tail"},
                       {"rank_a_raw", p.rank_a_raw},
                       {"rank_b_raw", p.rank_b_raw},
                       {"rank_a_filter", p.rank_a_filter},
                       {"rank_b_filter", p.rank_b_filter},
                       {"rank_raw", p.rank_raw},
                       {"rank_filter", p.rank_filter}});
  }
  write_report(c, {{"command", "eval-lp"},
                   {"mode", to_string(c.lp_mode)},
                   {"predictions", r.predictions},
                   {"mean_rank_raw", r.mean_rank_raw},
                   {"mean_rank_filter", r.mean_rank_filter},
                   {"hits10_raw", r.hits10_raw},
                   {"hits10_filter", r.hits10_filter},
                   {"hits10_a_raw", r.hits10_a_raw},
                   {"hits10_a_filter", r.hits10_a_filter},
                   {"hits10_b_raw", r.hits10_b_raw},
                   {"hits10_b_filter", r.hits10_b_filter},
                   {"categories", cells},
                   {"details", details}});
  return kExitOk;
}

int cmd_rank_sentences(Context& ctx) {
  const auto& c = ctx.config;
  const KnowledgeGraph kg = load_kg(c, "rank-sentences");
  const ReferenceCorpus corpus = load_corpus(ctx, kg);
  const ModelParams params = load_model(ctx, kg, "rank-sentences");
  std::vector<EntityId> entities;
  if (!c.entity.empty()) {
    const auto id = kg.entities.find(c.entity);
    if (!id) throw VocabularyError("unknown entity '" + c.entity + "'");
    entities.push_back(*id);
  } else {
    for (const auto& [e, _] : corpus.sentences) entities.push_back(e);
  }
  ctx.out << "entity\trank\tscore\tsentence\n";
  json report = json::array();
  for (EntityId e : entities) {
    const auto sentences = corpus.of(e);
    for (const auto& r : rank_sentences(e, params, corpus)) {
      const auto text = corpus.text(sentences[r.sentence]);
      ctx.out << kg.entities.name(e) << '\t' << r.rank << '\t' << fmt(r.score) << '\t' << text
              << '\n';
      report.push_back({{"entity", kg.entities.name(e)},
                        {"rank", r.rank},
                        {"score", r.score},
                        {"sentence_index", r.sentence},
                        {"sentence", text}});
    }
  }
  write_report(c, {{"command", "rank-sentences"}, {"rankings", report}});
  return kExitOk;
}

int cmd_gradcheck(Context& ctx) {
  const auto& c = ctx.config;
  KnowledgeGraph kg;
  ReferenceCorpus corpus;
  if (c.train_path.empty()) {
    SyntheticSpec toy;
    toy.n_entities = 10;
    toy.n_relations = 2;
    toy.n_triples = 16;
    toy.noise_sentences_per_entity = 1;
    toy.sentence_length = 5;
    toy.vocab_size = 20;
    auto data = generate_synthetic_dataset(toy, derive_seed(c.train.hp.seed, seed_offset::kSynthetic),
                                           c.sentence_cap, c.train.hp.d);
    kg = std::move(data.kg);
    corpus = std::move(data.corpus);
    ctx.err << "no triples given; checking on a 10-entity synthetic toy\n";
  } else {
    kg = load_kg(c, "gradcheck");
    corpus = load_corpus(ctx, kg);
  }
  ModelGradCheckOptions options;
  options.total_coords = c.gradcheck_coords;
  const GradCheckReport r = gradcheck_model(c.train, kg, corpus, options);
  ctx.out << "block\tcoords\tmax_rel_error\tunresolved\tmax_rel_error_resolved\tpass\n";
  json blocks = json::array();
  for (const auto& b : r.blocks) {
    const bool ok = b.max_rel_error < r.tolerance;
    ctx.out << b.name << '\t' << b.coords << '\t' << fmt(b.max_rel_error) << '\t' << b.unresolved
            << '\t' << fmt(b.max_rel_error_resolved) << '\t' << (ok ? 1 : 0) << '\n';
    blocks.push_back({{"name", b.name},
                      {"coords", b.coords},
                      {"max_rel_error", b.max_rel_error},
                      {"worst_index", b.worst_index},
                      {"worst_analytic", b.worst_analytic},
                      {"worst_numeric", b.worst_numeric},
                      {"unresolved", b.unresolved},
                      {"max_rel_error_resolved", b.max_rel_error_resolved}});
  }
  ctx.out << "overall\t-\t" << fmt(r.max_rel_error) << '\t' << r.unresolved << '\t'
          << fmt(r.max_rel_error_resolved) << '\t' << (r.pass ? 1 : 0) << '\n';
  write_report(c, {{"command", "gradcheck"},
                   {"pass", r.pass},
                   {"max_rel_error", r.max_rel_error},
                   {"step", r.step},
                   {"tolerance", r.tolerance},
                   {"noise_floor", r.noise_floor},
                   {"unresolved", r.unresolved},
                   {"max_rel_error_resolved", r.max_rel_error_resolved},
                   {"blocks", blocks}});
  if (!r.pass) {
    std::string failing;
    for (const auto& name : r.failing_blocks()) failing += " " + name;
    ctx.err << "gradient check failed:" << failing << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-graph embeddings from triples and reference sentences", "stkrl"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  app.add_option("--config", config_file, "key = value configuration file (default $STKRL_CONFIG)");

  struct Flag {
    const char* flag;
    const char* key;
    const char* help;
    std::string value;
  };
  std::vector<Flag> flags = {
      {"--seed", "seed", "global random seed", {}},
      {"--threads", "threads", "worker threads for text vectors and evaluation", {}},
      {"--encoder", "encoder", "rnn, rnn-pool or lstm", {}},
      {"--attention", "attention", "top-m or mean", {}},
      {"--loss-mode", "loss_mode", "four-hinges or summed", {}},
      {"--energy-mode", "energy_mode", "full or transE-only", {}},
      {"--norm", "norm", "l1 or l2", {}},
      {"--margin", "margin", "hinge margin", {}},
      {"--dim", "dim", "embedding dimension k", {}},
      {"--top-m", "top_m", "sentences kept by attention", {}},
      {"--clip-d", "clip_d", "position clipping distance", {}},
      {"--epochs", "epochs", "training epochs", {}},
      {"--lr", "learning_rate", "SGD learning rate", {}},
      {"--batch-size", "batch_size", "mini-batch size", {}},
      {"--train", "train", "training triples", {}},
      {"--valid", "valid", "validation triples", {}},
      {"--test", "test", "test triples", {}},
      {"--corpus", "corpus", "corpus cache file", {}},
      {"--text", "text", "raw text for extraction", {}},
      {"--word-vectors", "word_vectors", "pre-trained word vectors", {}},
      {"--warm-start", "warm_start", "checkpoint to copy entity/relation tables from", {}},
      {"--checkpoint", "checkpoint", "checkpoint written by train", {}},
      {"--model", "model", "checkpoint read by evaluation commands", {}},
      {"--report", "report", "JSON report path", {}},
      {"--out-dir", "out_dir", "output directory of synth", {}},
      {"--entity", "entity", "restrict rank-sentences to one entity", {}},
  };
  std::vector<CLI::Option*> options;
  for (auto& f : flags) options.push_back(app.add_option(f.flag, f.value, f.help));
  std::vector<std::string> sets;
  app.add_option("--set", sets, "any configuration key as key=value")->take_all();

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"extract", "collect reference sentences from raw text into a corpus cache"},
      {"synth", "write a synthetic dataset"},
      {"train", "train a model and write a checkpoint"},
      {"eval-tc", "triple classification accuracy"},
      {"eval-lp", "link prediction ranks and Hits@10"},
      {"rank-sentences", "reference sentences ordered by attention score"},
      {"gradcheck", "finite-difference check of the training gradients"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  std::string command;
  for (auto* sub : app.get_subcommands()) command = sub->get_name();

  try {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (options[i]->count() > 0) overrides.emplace_back(flags[i].key, flags[i].value);
    }
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(s, "--set expects key=value");
      overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    Context ctx{resolve_config(config_file, overrides), out, err};
    if (command == "extract") return cmd_extract(ctx);
    if (command == "synth") return cmd_synth(ctx);
    if (command == "train") return cmd_train(ctx);
    if (command == "eval-tc") return cmd_eval_tc(ctx);
    if (command == "eval-lp") return cmd_eval_lp(ctx);
    if (command == "rank-sentences") return cmd_rank_sentences(ctx);
    if (command == "gradcheck") return cmd_gradcheck(ctx);
    err << "error: unknown command\n" << app.help();
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace stkrl
