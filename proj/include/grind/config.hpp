// Experiment configuration: JSON round trips for the grammar, encoder, and
// training settings plus the paths and evaluation options the command-line
// pipeline needs. A stored config together with a seed reproduces a run.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "grind/evaluator.hpp"
#include "grind/grammar.hpp"
#include "grind/trainer_config.hpp"
#include "grind/variational.hpp"

namespace grind {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json grammar_config_to_json(const GrammarConfig& c);
GrammarConfig grammar_config_from_json(const nlohmann::json& j);

nlohmann::json encoder_config_to_json(const VariationalConfig& c);
VariationalConfig encoder_config_from_json(const nlohmann::json& j);

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Settings for the synthetic-corpus generator.
struct SynthConfig {
  std::int64_t n_nonterminals = 4;
  std::int64_t n_preterminals = 8;
  std::int64_t vocab_size = 50;
  std::int64_t train_sentences = 2000;
  std::int64_t val_sentences = 200;
  std::int64_t test_sentences = 400;
  std::int64_t max_length = 20;
  // Sparse rows make derivations low-entropy, so the sampled trees are
  // actually recoverable by a learner; near-1 concentrations give grammars
  // whose own best parse barely beats chance against their sampled trees.
  double rule_concentration = 0.02;  // Dirichlet concentration for rule draws
  double termination_bias = 0.3;     // multiplier on preterminal pair mass
  std::uint64_t seed = 13;

  void validate() const;
};

nlohmann::json synth_config_to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct ExperimentConfig {
  TrainConfig train;
  SynthConfig synth;

  // Bracketed input files per split (preprocess) and the working directory
  // every command writes under unless --out overrides it.
  std::string train_path;
  std::string val_path;
  std::string test_path;
  std::string out_dir = "out";

  std::int64_t vocab_cap = 10000;
  std::vector<std::string> eval_labels = kDefaultRecallLabels;

  void validate() const;
};

nlohmann::json experiment_config_to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace grind
