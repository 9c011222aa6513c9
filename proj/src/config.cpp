#include "grind/config.hpp"

#include <algorithm>

#include "grind/serialize.hpp"

namespace grind {

namespace {

// Strict field reader: unknown keys in `j` against `allowed` are config
// errors, so typos fail loudly instead of silently using defaults.
void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where + ": " + e.what());
  }
}

}  // namespace

nlohmann::json grammar_config_to_json(const GrammarConfig& c) {
  return {{"n_nonterminals", c.n_nonterminals}, {"n_preterminals", c.n_preterminals},
          {"vocab_size", c.vocab_size},         {"sym_dim", c.sym_dim},
          {"hidden_dim", c.hidden_dim},         {"z_dim", c.z_dim},
          {"share_start", c.share_start},       {"share_nonterminal", c.share_nonterminal},
          {"share_preterminal", c.share_preterminal}};
}

GrammarConfig grammar_config_from_json(const nlohmann::json& j) {
  check_keys(j,
             {"n_nonterminals", "n_preterminals", "vocab_size", "sym_dim", "hidden_dim", "z_dim",
              "share_start", "share_nonterminal", "share_preterminal"},
             "grammar config");
  GrammarConfig c;
  read(j, "n_nonterminals", c.n_nonterminals, "grammar config");
  read(j, "n_preterminals", c.n_preterminals, "grammar config");
  read(j, "vocab_size", c.vocab_size, "grammar config");
  read(j, "sym_dim", c.sym_dim, "grammar config");
  read(j, "hidden_dim", c.hidden_dim, "grammar config");
  read(j, "z_dim", c.z_dim, "grammar config");
  read(j, "share_start", c.share_start, "grammar config");
  read(j, "share_nonterminal", c.share_nonterminal, "grammar config");
  read(j, "share_preterminal", c.share_preterminal, "grammar config");
  return c;
}

nlohmann::json encoder_config_to_json(const VariationalConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"emb_dim", c.emb_dim},
          {"hidden_dim", c.hidden_dim},
          {"z_dim", c.z_dim}};
}

VariationalConfig encoder_config_from_json(const nlohmann::json& j) {
  check_keys(j, {"vocab_size", "emb_dim", "hidden_dim", "z_dim"}, "encoder config");
  VariationalConfig c;
  read(j, "vocab_size", c.vocab_size, "encoder config");
  read(j, "emb_dim", c.emb_dim, "encoder config");
  read(j, "hidden_dim", c.hidden_dim, "encoder config");
  read(j, "z_dim", c.z_dim, "encoder config");
  return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"grammar", grammar_config_to_json(c.grammar)},
          {"encoder", encoder_config_to_json(c.encoder)},
          {"max_train_len", c.max_train_len},
          {"epochs", c.epochs},
          {"n_seeds", c.n_seeds},
          {"base_seed", c.base_seed},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"grad_clip", c.grad_clip}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  check_keys(j,
             {"grammar", "encoder", "max_train_len", "epochs", "n_seeds", "base_seed",
              "batch_size", "learning_rate", "beta1", "beta2", "adam_eps", "grad_clip"},
             "train config");
  TrainConfig c;
  if (j.contains("grammar")) c.grammar = grammar_config_from_json(j.at("grammar"));
  if (j.contains("encoder")) c.encoder = encoder_config_from_json(j.at("encoder"));
  read(j, "max_train_len", c.max_train_len, "train config");
  read(j, "epochs", c.epochs, "train config");
  read(j, "n_seeds", c.n_seeds, "train config");
  read(j, "base_seed", c.base_seed, "train config");
  read(j, "batch_size", c.batch_size, "train config");
  read(j, "learning_rate", c.learning_rate, "train config");
  read(j, "beta1", c.beta1, "train config");
  read(j, "beta2", c.beta2, "train config");
  read(j, "adam_eps", c.adam_eps, "train config");
  read(j, "grad_clip", c.grad_clip, "train config");
  return c;
}

void SynthConfig::validate() const {
  if (n_nonterminals < 1 || n_preterminals < 1 || vocab_size < 1) {
    throw ConfigError("synth grammar sizes must be positive");
  }
  if (train_sentences < 1 || val_sentences < 1 || test_sentences < 1) {
    throw ConfigError("synth split sizes must be positive");
  }
  if (max_length < 2) throw ConfigError("synth max_length must be at least 2");
  if (rule_concentration <= 0.0) throw ConfigError("rule_concentration must be positive");
  if (termination_bias <= 0.0) throw ConfigError("termination_bias must be positive");
}

nlohmann::json synth_config_to_json(const SynthConfig& c) {
  return {{"n_nonterminals", c.n_nonterminals},
          {"n_preterminals", c.n_preterminals},
          {"vocab_size", c.vocab_size},
          {"train_sentences", c.train_sentences},
          {"val_sentences", c.val_sentences},
          {"test_sentences", c.test_sentences},
          {"max_length", c.max_length},
          {"rule_concentration", c.rule_concentration},
          {"termination_bias", c.termination_bias},
          {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  check_keys(j,
             {"n_nonterminals", "n_preterminals", "vocab_size", "train_sentences",
              "val_sentences", "test_sentences", "max_length", "rule_concentration",
              "termination_bias", "seed"},
             "synth config");
  SynthConfig c;
  read(j, "n_nonterminals", c.n_nonterminals, "synth config");
  read(j, "n_preterminals", c.n_preterminals, "synth config");
  read(j, "vocab_size", c.vocab_size, "synth config");
  read(j, "train_sentences", c.train_sentences, "synth config");
  read(j, "val_sentences", c.val_sentences, "synth config");
  read(j, "test_sentences", c.test_sentences, "synth config");
  read(j, "max_length", c.max_length, "synth config");
  read(j, "rule_concentration", c.rule_concentration, "synth config");
  read(j, "termination_bias", c.termination_bias, "synth config");
  read(j, "seed", c.seed, "synth config");
  return c;
}

void ExperimentConfig::validate() const {
  if (vocab_cap < 1) throw ConfigError("vocab_cap must be positive");
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
  if (eval_labels.empty()) throw ConfigError("eval_labels must not be empty");
  synth.validate();
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
  return {{"train", train_config_to_json(c.train)},
          {"synth", synth_config_to_json(c.synth)},
          {"data",
           {{"train", c.train_path},
            {"val", c.val_path},
            {"test", c.test_path},
            {"out_dir", c.out_dir},
            {"vocab_cap", c.vocab_cap}}},
          {"eval", {{"labels", c.eval_labels}}}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  check_keys(j, {"train", "synth", "data", "eval"}, "experiment config");
  ExperimentConfig c;
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"));
  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, {"train", "val", "test", "out_dir", "vocab_cap"}, "data config");
    read(d, "train", c.train_path, "data config");
    read(d, "val", c.val_path, "data config");
    read(d, "test", c.test_path, "data config");
    read(d, "out_dir", c.out_dir, "data config");
    read(d, "vocab_cap", c.vocab_cap, "data config");
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    check_keys(e, {"labels"}, "eval config");
    read(e, "labels", c.eval_labels, "eval config");
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = parse_json_file(path);
  } catch (const SerializeError& e) {
    throw ConfigError(e.what());
  }
  return experiment_config_from_json(j);
}

}  // namespace grind
