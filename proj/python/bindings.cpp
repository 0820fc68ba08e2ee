#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "stkrl/cli.hpp"
#include "stkrl/config.hpp"
#include "stkrl/error.hpp"
#include "stkrl/evaluator.hpp"
#include "stkrl/kg_data.hpp"
#include "stkrl/model.hpp"
#include "stkrl/trainer.hpp"

namespace py = pybind11;
using namespace stkrl;

namespace {

py::array_t<double> to_numpy(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  auto v = m.values();
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

using TripleTuple = std::tuple<EntityId, RelationId, EntityId>;

std::vector<TripleTuple> to_tuples(const std::vector<Triple>& ts) {
  std::vector<TripleTuple> out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.emplace_back(t.head, t.relation, t.tail);
  return out;
}

std::vector<Triple> from_tuples(const std::vector<TripleTuple>& ts) {
  std::vector<Triple> out;
  out.reserve(ts.size());
  for (const auto& [h, r, t] : ts) out.push_back({h, r, t});
  return out;
}

py::dict lp_to_dict(const LpResult& r) {
  py::dict d;
  d["predictions"] = r.predictions;
  d["mean_rank_raw"] = r.mean_rank_raw;
  d["mean_rank_filter"] = r.mean_rank_filter;
  d["hits10_raw"] = r.hits10_raw;
  d["hits10_filter"] = r.hits10_filter;
  d["hits10_a_filter"] = r.hits10_a_filter;
  d["hits10_b_filter"] = r.hits10_b_filter;
  return d;
}

}  // namespace

PYBIND11_MODULE(_stkrl, m) {
  m.doc() = "Sequential text-embodied knowledge representation learning";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<NumericError>(m, "NumericError", error.ptr());

  py::enum_<NormKind>(m, "NormKind").value("L1", NormKind::L1).value("L2", NormKind::L2);
  py::enum_<EncoderKind>(m, "EncoderKind")
      .value("RNN", EncoderKind::Rnn)
      .value("RNN_POOL", EncoderKind::RnnPool)
      .value("LSTM", EncoderKind::Lstm);
  py::enum_<EnergyMode>(m, "EnergyMode")
      .value("FULL", EnergyMode::Full)
      .value("TRANSE_ONLY", EnergyMode::TransEOnly);
  py::enum_<LossMode>(m, "LossMode")
      .value("FOUR_HINGES", LossMode::FourHinges)
      .value("SUMMED", LossMode::Summed);
  py::enum_<AggregationMode>(m, "AggregationMode")
      .value("ATTENTION", AggregationMode::Attention)
      .value("MEAN", AggregationMode::Mean);
  py::enum_<AttentionGrad>(m, "AttentionGrad")
      .value("STOP", AttentionGrad::Stop)
      .value("FULL", AttentionGrad::Full);

  py::class_<HyperParams>(m, "HyperParams")
      .def(py::init<>())
      .def_readwrite("k", &HyperParams::k)
      .def_readwrite("k_w", &HyperParams::k_w)
      .def_readwrite("k_p", &HyperParams::k_p)
      .def_readwrite("d", &HyperParams::d)
      .def_readwrite("m", &HyperParams::m)
      .def_readwrite("margin", &HyperParams::margin)
      .def_readwrite("norm", &HyperParams::norm)
      .def_readwrite("learning_rate", &HyperParams::learning_rate)
      .def_readwrite("batch_size", &HyperParams::batch_size)
      .def_readwrite("epochs", &HyperParams::epochs)
      .def_readwrite("epsilon", &HyperParams::epsilon)
      .def_readwrite("seed", &HyperParams::seed)
      .def_readwrite("energy_mode", &HyperParams::energy_mode)
      .def_readwrite("loss_mode", &HyperParams::loss_mode)
      .def_readwrite("encoder", &HyperParams::encoder)
      .def_readwrite("aggregation", &HyperParams::aggregation)
      .def_readwrite("attention_grad", &HyperParams::attention_grad)
      .def("validate", &HyperParams::validate);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("hp", &TrainConfig::hp)
      .def_readwrite("warm_start", &TrainConfig::warm_start)
      .def_readwrite("word_vectors", &TrainConfig::word_vectors)
      .def_readwrite("validation_interval", &TrainConfig::validation_interval)
      .def_readwrite("patience", &TrainConfig::patience)
      .def_readwrite("validation_sample", &TrainConfig::validation_sample);

  py::class_<KnowledgeGraph>(m, "KnowledgeGraph")
      .def(py::init<>())
      .def_property_readonly("n_entities", [](const KnowledgeGraph& kg) { return kg.entities.size(); })
      .def_property_readonly("n_relations", [](const KnowledgeGraph& kg) { return kg.relations.size(); })
      .def_property_readonly("entity_names", [](const KnowledgeGraph& kg) { return kg.entities.names(); })
      .def_property_readonly("relation_names", [](const KnowledgeGraph& kg) { return kg.relations.names(); })
      .def_property_readonly("train", [](const KnowledgeGraph& kg) { return to_tuples(kg.train); })
      .def_property_readonly("valid", [](const KnowledgeGraph& kg) { return to_tuples(kg.valid); })
      .def_property_readonly("test", [](const KnowledgeGraph& kg) { return to_tuples(kg.test); })
      .def("load", [](KnowledgeGraph& kg, const std::string& path, const std::string& split) {
        const Split s = split == "train" ? Split::Train : split == "valid" ? Split::Valid : Split::Test;
        if (split != "train" && split != "valid" && split != "test") throw ArgumentError("split: " + split);
        load_triples(path, kg, s);
      }, py::arg("path"), py::arg("split") = "train");

  py::class_<ReferenceCorpus>(m, "ReferenceCorpus")
      .def_property_readonly("total_sentences", &ReferenceCorpus::total_sentences)
      .def_property_readonly("vocabulary_size", [](const ReferenceCorpus& c) { return c.words.size(); })
      .def("sentences", [](const ReferenceCorpus& c, EntityId e) {
        std::vector<std::string> out;
        for (const auto& s : c.of(e)) out.push_back(c.text(s));
        return out;
      });

  m.def("read_corpus",
        [](const std::string& path, const KnowledgeGraph& kg, std::size_t cap, int d) {
          return read_corpus(path, kg, cap, d);
        },
        py::arg("path"), py::arg("kg"), py::arg("cap") = 40, py::arg("d") = 10);
  m.def("extract_reference_sentences",
        [](const std::string& text, const KnowledgeGraph& kg, std::size_t cap, int d) {
          return extract_reference_sentences(std::string_view(text), kg, cap, d);
        },
        py::arg("text"), py::arg("kg"), py::arg("cap") = 40, py::arg("d") = 10);

  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("n_entities", &SyntheticSpec::n_entities)
      .def_readwrite("n_relations", &SyntheticSpec::n_relations)
      .def_readwrite("n_triples", &SyntheticSpec::n_triples)
      .def_readwrite("signal_sentences_per_entity", &SyntheticSpec::signal_sentences_per_entity)
      .def_readwrite("noise_sentences_per_entity", &SyntheticSpec::noise_sentences_per_entity)
      .def_readwrite("sentence_length", &SyntheticSpec::sentence_length)
      .def_readwrite("vocab_size", &SyntheticSpec::vocab_size)
      .def_readwrite("n_types", &SyntheticSpec::n_types);

  py::class_<SyntheticDataset>(m, "SyntheticDataset")
      .def_readonly("kg", &SyntheticDataset::kg)
      .def_readonly("corpus", &SyntheticDataset::corpus)
      .def_readonly("is_signal", &SyntheticDataset::is_signal);

  m.def("generate_synthetic_dataset", &generate_synthetic_dataset, py::arg("spec"), py::arg("seed"),
        py::arg("cap") = 40, py::arg("d") = 10);

  m.def("compute_position_ids", &compute_position_ids, py::arg("n"), py::arg("anchor"), py::arg("d"));

  m.def("energy_term",
        [](const Vec& a, const Vec& r, const Vec& b, NormKind norm) { return energy_term(a, r, b, norm); },
        py::arg("a"), py::arg("r"), py::arg("b"), py::arg("norm") = NormKind::L1);
  m.def("energy_total",
        [](const Vec& hk, const Vec& hs, const Vec& r, const Vec& tk, const Vec& ts, NormKind norm) {
          return energy_total(hk, hs, r, tk, ts, norm);
        },
        py::arg("h_k"), py::arg("h_s"), py::arg("r"), py::arg("t_k"), py::arg("t_s"),
        py::arg("norm") = NormKind::L1);
  m.def("margin_loss", &margin_loss, py::arg("pos"), py::arg("neg"), py::arg("margin"));
  m.def("attention_score", [](const Vec& c, const Vec& e) { return attention_score(c, e); });

  py::class_<ModelParams>(m, "ModelParams")
      .def_readonly("config", &ModelParams::config)
      .def_property_readonly("entities", [](const ModelParams& p) { return to_numpy(p.entities); })
      .def_property_readonly("relations", [](const ModelParams& p) { return to_numpy(p.relations); })
      .def_property_readonly("words", [](const ModelParams& p) { return to_numpy(p.words.vectors); })
      .def("save", [](const ModelParams& p, const std::string& path) { save_checkpoint(p, path); })
      .def("__eq__", [](const ModelParams& a, const ModelParams& b) { return a == b; });
  m.def("load_checkpoint", [](const std::string& path) { return load_checkpoint(path); });

  py::class_<TrainLogEntry>(m, "TrainLogEntry")
      .def_readonly("epoch", &TrainLogEntry::epoch)
      .def_readonly("loss", &TrainLogEntry::loss)
      .def_readonly("val_hits10", &TrainLogEntry::val_hits10);
  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("log", &TrainResult::log)
      .def_readonly("best_epoch", &TrainResult::best_epoch)
      .def_readonly("stopped_early", &TrainResult::stopped_early);

  m.def("train",
        [](const TrainConfig& config, const KnowledgeGraph& kg, const ReferenceCorpus& corpus) {
          py::gil_scoped_release release;
          return train(config, kg, corpus);
        },
        py::arg("config"), py::arg("kg"), py::arg("corpus"));

  m.def("link_prediction",
        [](const ModelParams& params, const ReferenceCorpus& corpus, const KnowledgeGraph& kg,
           const std::string& split) {
          const auto& triples = split == "train" ? kg.train : split == "valid" ? kg.valid : kg.test;
          const auto view = make_view(params, corpus);
          return lp_to_dict(link_prediction(triples, view, kg));
        },
        py::arg("params"), py::arg("corpus"), py::arg("kg"), py::arg("split") = "test");
  m.def("link_prediction_triples",
        [](const ModelParams& params, const ReferenceCorpus& corpus, const KnowledgeGraph& kg,
           const std::vector<TripleTuple>& triples) {
          const auto view = make_view(params, corpus);
          return lp_to_dict(link_prediction(from_tuples(triples), view, kg));
        });

  m.def("triple_classification",
        [](const ModelParams& params, const ReferenceCorpus& corpus, const KnowledgeGraph& kg,
           std::uint64_t seed) {
          const auto report = evaluate_triple_classification(make_view(params, corpus), kg, seed);
          py::dict d;
          d["valid_accuracy"] = report.valid_accuracy;
          d["test_accuracy"] = report.test_accuracy;
          d["test_instances"] = report.test_instances;
          d["thresholds"] = report.thresholds.per_relation;
          return d;
        },
        py::arg("params"), py::arg("corpus"), py::arg("kg"), py::arg("seed") = 0);

  m.def("rank_sentences",
        [](EntityId e, const ModelParams& params, const ReferenceCorpus& corpus) {
          std::vector<std::tuple<std::size_t, std::size_t, double>> out;
          for (const auto& r : rank_sentences(e, params, corpus)) out.emplace_back(r.sentence, r.rank, r.score);
          return out;
        },
        py::arg("entity"), py::arg("params"), py::arg("corpus"));

  m.def("gradcheck",
        [](const TrainConfig& config, const KnowledgeGraph& kg, const ReferenceCorpus& corpus,
           std::size_t coords) {
          ModelGradCheckOptions options;
          options.total_coords = coords;
          const auto report = gradcheck_model(config, kg, corpus, options);
          py::dict d;
          d["pass"] = report.pass;
          d["max_rel_error"] = report.max_rel_error;
          d["max_rel_error_resolved"] = report.max_rel_error_resolved;
          py::dict blocks;
          for (const auto& b : report.blocks) blocks[py::str(b.name)] = b.max_rel_error;
          d["blocks"] = blocks;
          return d;
        },
        py::arg("config"), py::arg("kg"), py::arg("corpus"), py::arg("coords") = 200);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<const char*> argv{"stkrl"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return std::make_tuple(code, out.str(), err.str());
  });
}
