// Acceptance run: one PASS/FAIL line per criterion.
//
//   stkrl_acceptance [--only 1,2,...] [--allow-fail 1,7]
//
// Exit status is non-zero when a criterion outside --allow-fail fails or a
// criterion throws.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "properties.hpp"
#include "stkrl/cli.hpp"
#include "stkrl/config.hpp"
#include "stkrl/evaluator.hpp"
#include "stkrl/trainer.hpp"
#include "support.hpp"

using namespace stkrl;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "stkrl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (code != 0) std::cerr << e.str();
  return code;
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity.

Verdict gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  bool literal = true;
  double worst = 0.0, worst_resolved = 0.0;
  std::size_t unresolved = 0, runs = 0, failed_runs = 0;
  for (auto kind : {EncoderKind::Rnn, EncoderKind::RnnPool, EncoderKind::Lstm}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      SyntheticSpec toy;
      toy.n_entities = 10;
      toy.n_relations = 2;
      toy.n_triples = 16;
      toy.noise_sentences_per_entity = 1;
      toy.sentence_length = 5;
      toy.vocab_size = 20;
      const auto data = generate_synthetic_dataset(toy, derive_seed(seed, seed_offset::kSynthetic), 40, 2);
      TrainConfig cfg;
      cfg.hp.k = 4;
      cfg.hp.k_w = 3;
      cfg.hp.k_p = 2;
      cfg.hp.d = 2;
      cfg.hp.encoder = kind;
      cfg.hp.seed = seed;
      const auto r = gradcheck_model(cfg, data.kg, data.corpus);
      ++runs;
      if (!r.pass) ++failed_runs;
      literal = literal && r.pass;
      worst = std::max(worst, r.max_rel_error);
      worst_resolved = std::max(worst_resolved, r.max_rel_error_resolved);
      unresolved += r.unresolved;
    }
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = literal && secs < 60.0;
  v.detail = std::to_string(runs - failed_runs) + "/" + std::to_string(runs) +
             " runs pass; max rel error " + num(worst) + " (tol 1e-4); over coordinates the "
             "difference quotient resolves: " + num(worst_resolved) + " (" +
             std::to_string(unresolved) + " unresolved coords); " + num(secs, 3) + " s";
  return v;
}

// ---------------------------------------------------------------------------
// 2. Link prediction against the enumeration oracle, through eval-lp.

const char* kLpTrain = "A\tr\tB\nB\tr\tC\nC\ts\tD\nA\ts\tD\nD\tr\tA\n";
const char* kLpTest = "A\tr\tC\nB\ts\tD\nD\ts\tB\nC\tr\tA\n";

Verdict link_prediction_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = testing::temp_dir("acc_lp");
  testing::write_file(dir / "train.tsv", kLpTrain);
  testing::write_file(dir / "test.tsv", kLpTest);
  // A and D share a text vector, so tie-breaking by id is exercised.
  const std::vector<std::array<double, 2>> structure = {{0, 0}, {1, 0}, {2, 0}, {0, 1}};
  const std::vector<std::array<double, 2>> relations = {{1, 0}, {0.5, 0.75}};
  const std::vector<std::array<double, 2>> words = {{0.2, 0.1}, {0.9, -0.3}, {1.5, 0.2}, {0.2, 0.1}};
  auto m = testing::make_hand_model(kLpTrain, "", kLpTest, structure, relations, words);
  testing::write_file(dir / "corpus.tsv", testing::one_token_corpus(m.kg));

  std::size_t compared = 0, mismatches = 0;
  for (auto norm : {NormKind::L1, NormKind::L2}) {
    m.params.config.norm = norm;
    save_checkpoint(m.params, (dir / "model.ckpt").string());
    const std::string d = dir.string();
    if (cli({"eval-lp", "--train", d + "/train.tsv", "--test", d + "/test.tsv", "--corpus",
             d + "/corpus.tsv", "--model", d + "/model.ckpt", "--report", d + "/lp.json"}) != 0) {
      return {false, "eval-lp exited with an error"};
    }
    const auto report = json::parse(testing::read_file(dir / "lp.json"));

    std::vector<std::vector<double>> s, t, r;
    for (const auto& row : structure) s.push_back({row[0], row[1]});
    for (const auto& row : words) t.push_back({std::tanh(row[0]), std::tanh(row[1])});
    for (const auto& row : relations) r.push_back({row[0], row[1]});
    std::set<std::array<int, 3>> all_true;
    for (const auto* split : {&m.kg.train, &m.kg.test}) {
      for (const auto& x : *split) all_true.insert({x.head, x.relation, x.tail});
    }
    const auto oracle = testing::oracle_link_prediction(s, t, r, m.kg.test, all_true, norm == NormKind::L2);

    const auto& details = report["details"];
    if (details.size() != oracle.ranks.size()) return {false, "prediction count differs"};
    for (const auto& d2 : details) {
      std::size_t index = 0;
      for (; index < m.kg.test.size(); ++index) {
        const auto& x = m.kg.test[index];
        if (m.kg.entities.name(x.head) == d2["head"] && m.kg.relations.name(x.relation) == d2["relation"] &&
            m.kg.entities.name(x.tail) == d2["tail"]) {
          break;
        }
      }
      const auto& o = oracle.ranks[2 * index + (d2["side"] == "tail" ? 1 : 0)];
      const bool same = d2["rank_a_raw"] == o.a_raw && d2["rank_b_raw"] == o.b_raw &&
                        d2["rank_a_filter"] == o.a_filter && d2["rank_b_filter"] == o.b_filter;
      ++compared;
      if (!same) ++mismatches;
    }
    auto close = [](double a, double b) { return std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(b)); };
    if (!close(report["mean_rank_raw"], oracle.mean_rank_raw) ||
        !close(report["mean_rank_filter"], oracle.mean_rank_filter) ||
        !close(report["hits10_raw"], oracle.hits_raw) || !close(report["hits10_filter"], oracle.hits_filter)) {
      ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = mismatches == 0 && secs < 5.0;
  v.detail = std::to_string(compared) + " predictions (L1 and L2, both sides, lists A and B, raw and "
             "filtered) vs oracle, " + std::to_string(mismatches) + " mismatches; " + num(secs, 3) + " s";
  return v;
}

// ---------------------------------------------------------------------------
// 3. Triple classification against an exhaustive threshold sweep.

Verdict triple_classification_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const char* train = "A\tr\tB\nB\tr\tC\nC\ts\tD\nD\ts\tE\nE\tr\tF\nF\ts\tA\n";
  const char* valid = "A\tr\tC\nC\tr\tE\nB\tr\tF\nA\ts\tE\nD\ts\tB\nF\ts\tC\n";
  const char* test = "D\tr\tE\nC\tr\tA\nB\ts\tD\nE\ts\tF\n";
  const auto dir = testing::temp_dir("acc_tc");
  testing::write_file(dir / "train.tsv", train);
  testing::write_file(dir / "valid.tsv", valid);
  testing::write_file(dir / "test.tsv", test);
  const std::vector<std::array<double, 2>> structure = {{0.1, 0.2}, {0.9, 0.1}, {1.7, 0.4},
                                                        {0.3, 1.1}, {0.2, 1.9}, {1.2, 1.5}};
  const std::vector<std::array<double, 2>> relations = {{0.8, 0.05}, {0.1, 0.8}};
  const std::vector<std::array<double, 2>> words = {{0.3, 0.1}, {0.7, -0.2}, {1.1, 0.5},
                                                    {0.1, 0.9}, {-0.2, 1.4}, {0.8, 0.6}};
  auto m = testing::make_hand_model(train, valid, test, structure, relations, words);
  testing::write_file(dir / "corpus.tsv", testing::one_token_corpus(m.kg));
  save_checkpoint(m.params, (dir / "model.ckpt").string());
  const std::string d = dir.string();
  const std::uint64_t seed = 11;
  if (cli({"eval-tc", "--train", d + "/train.tsv", "--valid", d + "/valid.tsv", "--test", d + "/test.tsv",
           "--corpus", d + "/corpus.tsv", "--model", d + "/model.ckpt", "--seed", std::to_string(seed),
           "--report", d + "/tc.json"}) != 0) {
    return {false, "eval-tc exited with an error"};
  }
  const auto report = json::parse(testing::read_file(dir / "tc.json"));

  // Oracle: replay the seeded negative draws, score every instance from the
  // raw vectors, sweep thresholds per relation and count test decisions.
  auto row = [&](EntityId e, bool text) -> std::array<double, 2> {
    const auto& w = words[static_cast<std::size_t>(e)];
    return text ? std::array<double, 2>{std::tanh(w[0]), std::tanh(w[1])} : structure[static_cast<std::size_t>(e)];
  };
  auto energy = [&](const Triple& t, bool ht, bool tt) {
    const auto h = row(t.head, ht), x = row(t.tail, tt);
    const auto& r = relations[static_cast<std::size_t>(t.relation)];
    return std::fabs(h[0] + r[0] - x[0]) + std::fabs(h[1] + r[1] - x[1]);
  };
  Rng rng(derive_seed(seed, seed_offset::kEvaluation));
  auto expand = [&](const std::vector<Triple>& positives) {
    std::vector<std::pair<RelationId, std::pair<double, bool>>> out;
    for (const auto& t : positives) {
      for (int combo = 0; combo < 4; ++combo) {
        const bool ht = combo == 1 || combo == 3, tt = combo == 2 || combo == 3;
        out.push_back({t.relation, {energy(t, ht, tt), true}});
        const auto neg = sample_negative(t, m.kg.entities.size(), m.kg.all_true, rng);
        out.push_back({t.relation, {energy(neg.triple, ht, tt), false}});
      }
    }
    return out;
  };
  const auto valid_inst = expand(m.kg.valid);
  const auto test_inst = expand(m.kg.test);

  std::map<RelationId, std::vector<std::pair<double, bool>>> by_relation;
  std::vector<std::pair<double, bool>> pooled;
  for (const auto& [r, inst] : valid_inst) {
    by_relation[r].push_back(inst);
    pooled.push_back(inst);
  }
  std::map<RelationId, double> deltas;
  std::size_t mismatches = 0;
  std::string shown;
  for (const auto& [r, inst] : by_relation) {
    const auto o = testing::oracle_threshold(inst);
    deltas[r] = o.delta;
    const double got = report["thresholds"][m.kg.relations.name(r)];
    if (std::fabs(got - o.delta) > 1e-12) ++mismatches;
    shown += " " + m.kg.relations.name(r) + "=" + num(got, 6) + "/" + num(o.delta, 6);
  }
  if (std::fabs(report["global_threshold"].get<double>() - testing::oracle_threshold(pooled).delta) > 1e-12) {
    ++mismatches;
  }
  std::size_t correct = 0;
  for (const auto& [r, inst] : test_inst) correct += ((inst.first < deltas.at(r)) == inst.second) ? 1 : 0;
  const double hand = 100.0 * static_cast<double>(correct) / static_cast<double>(test_inst.size());
  const double got_acc = report["test_accuracy"];
  const bool acc_ok = std::fabs(got_acc - hand) < 1e-9;
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = mismatches == 0 && acc_ok && secs < 5.0;
  v.detail = "delta fitted/sweep:" + shown + "; test accuracy " + num(got_acc, 6) + "% vs hand " +
             num(hand, 6) + "% (" + std::to_string(correct) + "/" + std::to_string(test_inst.size()) +
             "); " + num(secs, 3) + " s";
  return v;
}

// ---------------------------------------------------------------------------
// 4. TransE specialization.

Verdict transe_specialization() {
  const auto dir = testing::temp_dir("acc_transe");
  const std::string d = dir.string();
  if (cli({"synth", "--out-dir", d, "--seed", "4"}) != 0) return {false, "synth failed"};
  const std::vector<std::string> overrides = {"--energy-mode", "transE-only", "--encoder", "lstm",
                                              "--dim", "20", "--set", "word_dim=10", "--epochs", "5",
                                              "--seed", "4", "--batch-size", "20"};
  std::vector<std::string> args = {"train", "--train", d + "/train.tsv", "--valid", d + "/valid.tsv",
                                   "--corpus", d + "/corpus.tsv", "--checkpoint", d + "/transe.ckpt"};
  args.insert(args.end(), overrides.begin(), overrides.end());
  if (cli(args) != 0) return {false, "train failed"};

  KnowledgeGraph kg;
  load_triples(d + "/train.tsv", kg, Split::Train);
  load_triples(d + "/valid.tsv", kg, Split::Valid);
  const auto corpus = read_corpus(d + "/corpus.tsv", kg);
  const auto config = resolve_config("", {{"energy_mode", "transE-only"}, {"encoder", "lstm"}, {"dim", "20"},
                                          {"word_dim", "10"}, {"epochs", "5"}, {"seed", "4"},
                                          {"batch_size", "20"}});
  Rng init_rng(derive_seed(4, seed_offset::kInit));
  const auto initial = init_params(config.train, kg, corpus, init_rng);
  const auto trained = load_checkpoint(d + "/transe.ckpt");
  const bool untouched = trained.words == initial.words && trained.positions == initial.positions &&
                         trained.encoder == initial.encoder;
  const bool moved = trained.entities != initial.entities;

  // energy_total against 4 E_KK on random triples with the model's own
  // text representations.
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto h = static_cast<EntityId>(rng.below(kg.entities.size()));
    const auto t = static_cast<EntityId>(rng.below(kg.entities.size()));
    const auto r = static_cast<std::size_t>(rng.below(kg.relations.size()));
    const auto sh = build_text_representation(h, trained, corpus).s;
    const auto st = build_text_representation(t, trained, corpus).s;
    const auto hk = trained.entities.row(static_cast<std::size_t>(h));
    const auto tk = trained.entities.row(static_cast<std::size_t>(t));
    const auto rr = trained.relations.row(r);
    const double total = energy_total(hk, sh, rr, tk, st, trained.config.norm);
    const double four = 4.0 * energy_term(hk, rr, tk, trained.config.norm);
    worst = std::max(worst, std::fabs(total - four) / std::max(1.0, four));
  }
  Verdict v;
  v.pass = untouched && moved && worst <= 4 * 2.220446049250313e-16;
  v.detail = "max |E_total - 4 E_KK| / max(1, 4 E_KK) = " + num(worst) + " over 1000 triples; text tables " +
             (untouched ? "bit-identical" : "CHANGED") + " after 5 epochs; entity table " +
             (moved ? "updated" : "not updated");
  return v;
}

// ---------------------------------------------------------------------------
// 5. Memorization (and the logs for the smoothed-loss property).

TrainConfig memorization_config(std::uint64_t seed) {
  TrainConfig cfg;
  auto& hp = cfg.hp;
  hp.encoder = EncoderKind::RnnPool;
  hp.k = 100;
  hp.k_w = 50;
  hp.k_p = 5;
  hp.batch_size = 10;
  hp.learning_rate = 0.005;
  hp.margin = 0.25;
  hp.norm = NormKind::L1;
  hp.epochs = 200;
  hp.seed = seed;
  cfg.validation_interval = hp.epochs + 1;  // no model selection
  return cfg;
}

struct MemorizationRun {
  std::vector<double> losses;
  double hits10_filter = 0.0;
  double seconds = 0.0;
  double signal_at_1 = 0.0;
};

MemorizationRun memorize(std::uint64_t seed, std::size_t noise) {
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticSpec spec;
  spec.noise_sentences_per_entity = noise;
  const auto data = generate_synthetic_dataset(spec, seed);
  const auto cfg = memorization_config(seed);
  MemorizationRun run;
  const auto result = train(cfg, data.kg, data.corpus, {}, [&](const TrainLogEntry& e) {
    run.losses.push_back(e.loss);
  });
  const auto view = make_view(result.params, data.corpus);
  run.hits10_filter = link_prediction(data.kg.train, view, data.kg).hits10_filter;
  std::size_t top = 0, n = 0;
  for (const auto& [e, flags] : data.is_signal) {
    const auto ranked = rank_sentences(e, result.params, data.corpus);
    if (ranked.empty()) continue;
    ++n;
    top += flags[ranked[0].sentence] ? 1 : 0;
  }
  run.signal_at_1 = n ? 100.0 * static_cast<double>(top) / static_cast<double>(n) : 0.0;
  run.seconds = seconds_since(t0);
  return run;
}

std::vector<MemorizationRun> g_memorization;  // seeds 0..4, two noise sentences

const std::vector<MemorizationRun>& memorization_runs() {
  if (g_memorization.empty()) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) g_memorization.push_back(memorize(seed, 2));
  }
  return g_memorization;
}

Verdict memorization() {
  const auto& runs = memorization_runs();
  const auto& r = runs[0];
  const double ratio = 100.0 * r.losses.back() / r.losses.front();
  std::string others;
  for (std::size_t s = 1; s < runs.size(); ++s) {
    others += (s > 1 ? ", " : "") + num(100.0 * runs[s].losses.back() / runs[s].losses.front(), 3) + "%";
  }
  Verdict v;
  v.pass = ratio < 1.0 && r.hits10_filter >= 95.0 && r.seconds < 600.0;
  v.detail = "seed 0: final/first loss " + num(ratio, 3) + "% (< 1%), train filtered Hits@10 " +
             num(r.hits10_filter, 4) + "% (>= 95%), " + num(r.seconds, 3) + " s; seeds 1-4 ratios " + others;
  return v;
}

// ---------------------------------------------------------------------------
// 6. Ablation ordering.

Verdict ablation() {
  const auto t0 = std::chrono::steady_clock::now();
  double sums[3] = {0, 0, 0};
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticSpec spec;
    spec.n_entities = 100;
    spec.n_relations = 6;
    spec.n_triples = 600;
    const auto data = generate_synthetic_dataset(spec, seed);
    double h[3];
    for (int mode = 0; mode < 3; ++mode) {
      TrainConfig cfg;
      auto& hp = cfg.hp;
      hp.encoder = EncoderKind::RnnPool;
      hp.k = 50;
      hp.k_w = 50;
      hp.k_p = 5;
      hp.batch_size = 10;
      hp.learning_rate = 0.003;
      hp.margin = 0.5;
      hp.epochs = 100;
      hp.seed = seed;
      if (mode == 1) hp.aggregation = AggregationMode::Mean;
      if (mode == 2) hp.energy_mode = EnergyMode::TransEOnly;
      cfg.validation_interval = hp.epochs + 1;
      const auto result = train(cfg, data.kg, data.corpus);
      const auto view = make_view(result.params, data.corpus);
      h[mode] = link_prediction(data.kg.test, view, data.kg).hits10_filter;
      sums[mode] += h[mode];
    }
    per_seed += (seed > 1 ? "; " : "") + num(h[0], 3) + "/" + num(h[1], 3) + "/" + num(h[2], 3);
  }
  const double att = sums[0] / 5, mean = sums[1] / 5, transe = sums[2] / 5;
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = att >= mean && mean >= transe && secs < 1800.0;
  v.detail = "mean filtered Hits@10 attention " + num(att, 4) + " >= no attention " + num(mean, 4) +
             " >= transE-only " + num(transe, 4) + " (per seed " + per_seed + "); " + num(secs, 4) + " s";
  return v;
}

// ---------------------------------------------------------------------------
// 7. Attention selectivity.

Verdict selectivity() {
  const auto r = memorize(0, 4);
  Verdict v;
  v.pass = r.signal_at_1 >= 80.0;
  v.detail = "signal sentence ranked first for " + num(r.signal_at_1, 4) +
             "% of entities with 1 signal + 4 noise sentences (>= 80%; chance 20%); " + num(r.seconds, 3) + " s";
  return v;
}

// ---------------------------------------------------------------------------
// 8. Determinism.

Verdict determinism() {
  const auto dir = testing::temp_dir("acc_det");
  const std::string d = dir.string();
  if (cli({"synth", "--out-dir", d, "--seed", "8"}) != 0) return {false, "synth failed"};
  // Same paths for both runs: the report echoes the resolved config.
  auto run = [&](std::string& ckpt, std::string& report) {
    const int code = cli({"train", "--train", d + "/train.tsv", "--valid", d + "/valid.tsv", "--corpus",
                          d + "/corpus.tsv", "--checkpoint", d + "/m.ckpt", "--report", d + "/m.json",
                          "--dim", "20", "--set", "word_dim=20", "--epochs", "12", "--seed", "8", "--set",
                          "validation_interval=4"});
    ckpt = testing::read_file(dir / "m.ckpt");
    report = testing::read_file(dir / "m.json");
    std::filesystem::remove(dir / "m.ckpt");
    std::filesystem::remove(dir / "m.json");
    return code;
  };
  std::string a, b, report_a, report_b;
  if (run(a, report_a) != 0) return {false, "train failed"};
  testing::write_file(dir / "a.ckpt", a);
  if (run(b, report_b) != 0) return {false, "train failed"};
  const bool same_ckpt = a == b && !a.empty();
  const bool same_report = report_a == report_b && !report_a.empty();
  std::stringstream resaved;
  save_checkpoint(load_checkpoint(d + "/a.ckpt"), resaved);
  const bool round_trip = resaved.str() == a;
  Verdict v;
  v.pass = same_ckpt && same_report && round_trip;
  v.detail = std::string("checkpoints ") + (same_ckpt ? "byte-identical" : "DIFFER") + " (" +
             std::to_string(a.size()) + " bytes), reports " + (same_report ? "identical" : "DIFFER") +
             ", load/save round trip " + (round_trip ? "bit-exact" : "NOT exact");
  return v;
}

// ---------------------------------------------------------------------------
// 9. Property suite.

Verdict property_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t total = 0, failing = 0;
  std::string failures;
  std::uint64_t seed = 100;
  for (const auto& p : properties::all_properties()) {
    const auto o = properties::run_property(p, 100, seed++);
    ++total;
    const bool ok = o.failures == 0 && o.instances >= 100;
    std::cout << "    " << (ok ? "ok  " : "FAIL") << "  [" << p.module << "] " << p.name << " ("
              << o.instances << " checks";
    if (!o.note.empty()) std::cout << "; " << o.note;
    if (!ok) std::cout << ", " << o.failures << " failed; first: " << o.first_failure;
    std::cout << ")\n";
    if (!ok) {
      ++failing;
      failures += " " + p.name;
    }
  }

  // Smoothed memorization loss, averaged over five seeds.
  const auto& runs = memorization_runs();
  const std::size_t epochs = runs[0].losses.size();
  std::vector<double> windows;
  for (std::size_t w = 0; w + 10 <= epochs; w += 10) {
    double s = 0.0;
    for (const auto& r : runs) {
      for (std::size_t e = w; e < w + 10; ++e) s += r.losses[e];
    }
    windows.push_back(s / (10.0 * static_cast<double>(runs.size())));
  }
  std::size_t rises = 0;
  for (std::size_t i = 1; i < windows.size(); ++i) rises += windows[i] > windows[i - 1] ? 1 : 0;
  ++total;
  std::cout << "    " << (rises == 0 ? "ok  " : "FAIL")
            << "  [trainer] memorization loss non-increasing over 10-epoch windows, 5 seeds ("
            << windows.size() << " windows, " << rises << " rises)\n";
  if (rises) {
    std::cout << "          window means:";
    for (double w : windows) std::cout << ' ' << num(w, 4);
    std::cout << '\n';
    ++failing;
    failures += " smoothed-loss";
  }

  Verdict v;
  v.pass = failing == 0;
  v.detail = std::to_string(total - failing) + "/" + std::to_string(total) + " properties hold at 100 instances each" +
             (failing ? "; failing:" + failures : "") + "; " + num(seconds_since(t0), 3) + " s";
  return v;
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.insert(std::stoi(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, allowed;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--only") only = parse_list(argv[i + 1]);
    else if (flag == "--allow-fail") allowed = parse_list(argv[i + 1]);
    else {
      std::cerr << "usage: stkrl_acceptance [--only 1,2] [--allow-fail 1,7]\n";
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"link prediction oracle", link_prediction_oracle},
      {"triple classification oracle", triple_classification_oracle},
      {"transE specialization", transe_specialization},
      {"memorization", memorization},
      {"ablation ordering", ablation},
      {"attention selectivity", selectivity},
      {"determinism", determinism},
      {"property suite", property_suite},
  };

  int passed = 0, run = 0, blocking = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.contains(id)) continue;
    ++run;
    Verdict v;
    bool threw = false;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
      threw = true;
    }
    if (v.pass) {
      ++passed;
    } else if (threw || !allowed.contains(id)) {
      ++blocking;
    }
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": " << v.detail
              << std::endl;
  }
  std::cout << "acceptance: " << passed << "/" << run << " criteria pass" << std::endl;
  return blocking ? 1 : 0;
}
