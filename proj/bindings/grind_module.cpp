#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "grind/chart.hpp"
#include "grind/evaluator.hpp"
#include "grind/grammar.hpp"
#include "grind/rng.hpp"
#include "grind/serialize.hpp"
#include "grind/synth.hpp"
#include "grind/trainer.hpp"
#include "grind/treebank.hpp"
#include "grind/variational.hpp"

namespace py = pybind11;
using namespace grind;

PYBIND11_MODULE(_grind, m) {
  m.doc() = "grammar induction toolkit: neural and compound PCFGs";

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("uniform", [](Rng& r) { return r.uniform(); })
      .def("normal", [](Rng& r) { return r.normal(); })
      .def("below", &Rng::below, py::arg("n"));

  py::class_<Tensor>(m, "Tensor")
      .def_static(
          "from_values",
          [](Shape shape, std::vector<double> values) {
            return Tensor::from(std::move(shape), std::move(values));
          },
          py::arg("shape"), py::arg("values"))
      .def_property_readonly("shape", [](const Tensor& t) { return t.shape(); })
      .def("tolist", [](const Tensor& t) { return t.values(); })
      .def("__len__", [](const Tensor& t) { return t.size(); });

  py::class_<ArrayStore>(m, "ArrayStore")
      .def(py::init<>())
      .def("names", &ArrayStore::names)
      .def("has", &ArrayStore::has, py::arg("name"))
      .def("get", &ArrayStore::get, py::arg("name"), py::return_value_policy::copy)
      .def("put", &ArrayStore::put, py::arg("name"), py::arg("value"))
      .def("save", &ArrayStore::save, py::arg("path"))
      .def_static("load", &ArrayStore::load, py::arg("path"));

  py::class_<GrammarConfig>(m, "GrammarConfig")
      .def(py::init<>())
      .def_readwrite("n_nonterminals", &GrammarConfig::n_nonterminals)
      .def_readwrite("n_preterminals", &GrammarConfig::n_preterminals)
      .def_readwrite("vocab_size", &GrammarConfig::vocab_size)
      .def_readwrite("sym_dim", &GrammarConfig::sym_dim)
      .def_readwrite("hidden_dim", &GrammarConfig::hidden_dim)
      .def_readwrite("z_dim", &GrammarConfig::z_dim)
      .def_readwrite("share_start", &GrammarConfig::share_start)
      .def_readwrite("share_nonterminal", &GrammarConfig::share_nonterminal)
      .def_readwrite("share_preterminal", &GrammarConfig::share_preterminal)
      .def("validate", &GrammarConfig::validate)
      .def("uses_z", &GrammarConfig::uses_z);

  py::class_<VariationalConfig>(m, "VariationalConfig")
      .def(py::init<>())
      .def_readwrite("vocab_size", &VariationalConfig::vocab_size)
      .def_readwrite("emb_dim", &VariationalConfig::emb_dim)
      .def_readwrite("hidden_dim", &VariationalConfig::hidden_dim)
      .def_readwrite("z_dim", &VariationalConfig::z_dim)
      .def("validate", &VariationalConfig::validate);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("grammar", &TrainConfig::grammar)
      .def_readwrite("encoder", &TrainConfig::encoder)
      .def_readwrite("max_train_len", &TrainConfig::max_train_len)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("n_seeds", &TrainConfig::n_seeds)
      .def_readwrite("base_seed", &TrainConfig::base_seed)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def("validate", &TrainConfig::validate);

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_nonterminals", &SynthConfig::n_nonterminals)
      .def_readwrite("n_preterminals", &SynthConfig::n_preterminals)
      .def_readwrite("vocab_size", &SynthConfig::vocab_size)
      .def_readwrite("train_sentences", &SynthConfig::train_sentences)
      .def_readwrite("val_sentences", &SynthConfig::val_sentences)
      .def_readwrite("test_sentences", &SynthConfig::test_sentences)
      .def_readwrite("max_length", &SynthConfig::max_length)
      .def_readwrite("rule_concentration", &SynthConfig::rule_concentration)
      .def_readwrite("termination_bias", &SynthConfig::termination_bias)
      .def_readwrite("seed", &SynthConfig::seed);

  py::class_<Span>(m, "Span")
      .def(py::init([](std::int32_t start, std::int32_t end, const std::string& label) {
             return Span{start, end, label};
           }),
           py::arg("start"), py::arg("end"), py::arg("label") = "")
      .def_readonly("start", &Span::start)
      .def_readonly("end", &Span::end)
      .def_readonly("label", &Span::label)
      .def("__repr__", [](const Span& s) {
        return "Span(" + std::to_string(s.start) + ", " + std::to_string(s.end) + ", '" +
               s.label + "')";
      })
      .def("__eq__", [](const Span& a, const Span& b) { return a == b; });

  py::class_<GoldTree>(m, "GoldTree")
      .def(py::init<>())
      .def_readwrite("tokens", &GoldTree::tokens)
      .def_readwrite("pos_tags", &GoldTree::pos_tags)
      .def_readwrite("spans", &GoldTree::spans);

  m.def("parse_bracketed", &parse_bracketed, py::arg("line"));
  m.def("bracket_string", &bracket_string, py::arg("tokens"), py::arg("pos_tags"),
        py::arg("spans"));

  // Grammar: parameter initialization and rule-table evaluation.
  m.def(
      "init_grammar",
      [](ArrayStore& store, const GrammarConfig& config, Rng& rng) {
        init_grammar(store, config, rng);
      },
      py::arg("store"), py::arg("config"), py::arg("rng"));

  py::class_<RuleTableValues>(m, "RuleTableValues")
      .def_readonly("start", &RuleTableValues::start)
      .def_readonly("nonterminal", &RuleTableValues::nonterminal)
      .def_readonly("preterminal", &RuleTableValues::preterminal);

  py::class_<RuleTables>(m, "RuleTables")
      .def(py::init([](Tensor start, Tensor nonterminal, Tensor preterminal) {
             return RuleTables{std::move(start), std::move(nonterminal),
                               std::move(preterminal)};
           }),
           py::arg("start"), py::arg("nonterminal"), py::arg("preterminal"))
      .def_readonly("start", &RuleTables::start)
      .def_readonly("nonterminal", &RuleTables::nonterminal)
      .def_readonly("preterminal", &RuleTables::preterminal);

  m.def("rule_table", &rule_table, py::arg("store"), py::arg("config"),
        py::arg("z") = std::nullopt);
  m.def("tables_from_batch", &tables_from_batch, py::arg("values"), py::arg("b"));

  // Chart algorithms.
  m.def("inside_log_z", &inside_logZ, py::arg("ids"), py::arg("tables"));
  m.def(
      "viterbi_parse",
      [](const std::vector<std::int32_t>& ids, const RuleTables& tables) {
        const auto [tree, score] = viterbi_parse(ids, tables);
        std::vector<std::tuple<std::int32_t, std::int32_t, std::int32_t, std::int32_t>> nodes;
        nodes.reserve(tree.nodes.size());
        for (const ParseNode& n : tree.nodes) {
          nodes.emplace_back(n.start, n.end, n.split, n.symbol);
        }
        return py::make_tuple(nodes, score);
      },
      py::arg("ids"), py::arg("tables"),
      "Best parse as (nodes, log_score); each node is (start, end, split, symbol), "
      "split -1 on preterminal leaves.");

  // Variational encoder.
  py::class_<LatentPosterior>(m, "LatentPosterior")
      .def_readonly("mu", &LatentPosterior::mu)
      .def_readonly("logvar", &LatentPosterior::logvar);

  m.def(
      "init_encoder",
      [](ArrayStore& store, const VariationalConfig& config, Rng& rng) {
        init_encoder(store, config, rng);
      },
      py::arg("store"), py::arg("config"), py::arg("rng"));
  m.def("encode", &encode, py::arg("ids"), py::arg("config"), py::arg("store"));
  m.def("sample_z", &sample_z, py::arg("posterior"), py::arg("noise"));
  m.def("kl_to_prior", &kl_to_prior, py::arg("posterior"));
  m.def("map_embedding", &map_embedding, py::arg("posterior"));

  // Training loss.
  m.def(
      "elbo_loss",
      [](const std::vector<std::vector<std::int32_t>>& batch, const ArrayStore& params,
         const TrainConfig& config, const std::optional<Tensor>& noise) {
        const ElboParts parts = elbo_loss(batch, params, config, noise);
        return py::make_tuple(parts.loss, parts.nll, parts.kl);
      },
      py::arg("batch"), py::arg("params"), py::arg("config"), py::arg("noise") = std::nullopt,
      "Mean negative ELBO over the batch as (loss, nll, kl).");

  // Evaluation.
  m.def("filter_spans", &filter_spans, py::arg("spans"), py::arg("n"));
  m.def(
      "f1_scores",
      [](const std::vector<std::pair<SpanSet, SpanSet>>& pairs) {
        const F1Result r = f1_scores(pairs);
        return py::make_tuple(r.corpus_f1, r.sentence_f1, r.scored_sentences);
      },
      py::arg("pairs"), "(corpus_f1, sentence_f1, scored_sentences) over (pred, gold) pairs.");
  m.def("label_recall", &label_recall, py::arg("gold_labeled"), py::arg("predicted"),
        py::arg("labels"));
  m.def(
      "baseline_tree",
      [](const std::string& mode, std::int32_t n, std::uint64_t seed) {
        return baseline_tree(baseline_mode_from_string(mode), n, seed);
      },
      py::arg("mode"), py::arg("n"), py::arg("seed") = 0);

  // Synthetic treebank sampling.
  m.def(
      "sample_synth_corpus",
      [](const SynthConfig& config) {
        Rng rng(config.seed);
        const SynthGrammar grammar = sample_synth_grammar(config, rng);
        const TreebankSplits splits = sample_corpus(grammar, rng);
        py::dict out;
        out["train"] = splits.train;
        out["valid"] = splits.valid;
        out["test"] = splits.test;
        out["acceptance"] = grammar.acceptance;
        return out;
      },
      py::arg("config"));

  py::register_exception<TreebankError>(m, "TreebankError");
  py::register_exception<SerializeError>(m, "SerializeError");
  py::register_exception<EvalError>(m, "EvalError");
  py::register_exception<SynthError>(m, "SynthError");
}
