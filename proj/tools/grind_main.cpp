#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "grind/pipeline.hpp"
#include "grind/serialize.hpp"

namespace {

using namespace grind;

// Stored effective config, one file per subcommand, so a run can be replayed
// from its output directory alone.
void store_config(const ExperimentConfig& config, const std::string& command) {
  write_json_file((std::filesystem::path(config.out_dir) / ("config_" + command + ".json")).string(),
                  experiment_config_to_json(config));
}

struct Cli {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;

  ExperimentConfig load() const {
    ExperimentConfig config;
    if (!config_path.empty()) config = load_experiment_config(config_path);
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (seed) {
      config.train.base_seed = *seed;
      config.synth.seed = *seed;
    }
    return config;
  }
};

void add_global_flags(CLI::App* cmd, Cli& cli) {
  cmd->add_option("--config", cli.config_path, "experiment config JSON");
  cmd->add_option("--seed", cli.seed, "override the base random seed");
  cmd->add_option("--out", cli.out_dir, "override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grammar induction toolkit: neural and compound PCFGs"};
  app.require_subcommand(1);
  Cli cli;

  // preprocess
  auto* preprocess = app.add_subcommand("preprocess", "read bracketed treebank splits, emit corpus files");
  add_global_flags(preprocess, cli);
  std::string train_file, valid_file, test_file;
  std::optional<std::int64_t> max_train_len, vocab_cap;
  preprocess->add_option("--train-file", train_file, "bracketed train split");
  preprocess->add_option("--valid-file", valid_file, "bracketed validation split");
  preprocess->add_option("--test-file", test_file, "bracketed test split");
  preprocess->add_option("--max-train-len", max_train_len, "training length cap");
  preprocess->add_option("--vocab-cap", vocab_cap, "vocabulary size cap");

  // train
  auto* train_cmd = app.add_subcommand("train", "fit the model on a preprocessed corpus");
  add_global_flags(train_cmd, cli);
  std::optional<std::int64_t> n_seeds, epochs;
  bool share_start = false, share_nonterminal = false, share_preterminal = false;
  train_cmd->add_option("--seeds", n_seeds, "number of random seeds");
  train_cmd->add_option("--epochs", epochs, "training epochs");
  train_cmd->add_flag("--share-start", share_start, "z-independent start rules");
  train_cmd->add_flag("--share-nonterminal", share_nonterminal, "z-independent binary rules");
  train_cmd->add_flag("--share-preterminal", share_preterminal, "z-independent emissions");

  // parse
  auto* parse_cmd = app.add_subcommand("parse", "decode trees with a checkpoint");
  add_global_flags(parse_cmd, cli);
  std::string checkpoint_path, parse_split = "test";
  parse_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  parse_cmd->add_option("--split", parse_split, "corpus split to parse");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score predictions or a baseline against gold");
  add_global_flags(eval_cmd, cli);
  std::string predictions_path, baseline_name, eval_split = "test";
  bool by_length = false;
  eval_cmd->add_option("--predictions", predictions_path, "parse output jsonl");
  eval_cmd->add_option("--baseline", baseline_name, "left, right, or random");
  eval_cmd->add_option("--split", eval_split, "gold corpus split");
  eval_cmd->add_flag("--by-length", by_length, "also emit a per-width CSV");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "sample a synthetic treebank");
  add_global_flags(synth_cmd, cli);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (preprocess->parsed()) {
      ExperimentConfig config = cli.load();
      if (!train_file.empty()) config.train_path = train_file;
      if (!valid_file.empty()) config.val_path = valid_file;
      if (!test_file.empty()) config.test_path = test_file;
      if (max_train_len) config.train.max_train_len = *max_train_len;
      if (vocab_cap) config.vocab_cap = *vocab_cap;
      run_preprocess(config, std::cerr);
      store_config(config, "preprocess");
    } else if (train_cmd->parsed()) {
      ExperimentConfig config = cli.load();
      if (n_seeds) config.train.n_seeds = *n_seeds;
      if (epochs) config.train.epochs = *epochs;
      if (share_start) config.train.grammar.share_start = true;
      if (share_nonterminal) config.train.grammar.share_nonterminal = true;
      if (share_preterminal) config.train.grammar.share_preterminal = true;
      run_train(config, std::cerr);
      store_config(config, "train");
    } else if (parse_cmd->parsed()) {
      const ExperimentConfig config = cli.load();
      run_parse(config, checkpoint_path, parse_split, std::cerr);
      store_config(config, "parse");
    } else if (eval_cmd->parsed()) {
      const ExperimentConfig config = cli.load();
      if (predictions_path.empty() == baseline_name.empty()) {
        std::cerr << "evaluate needs exactly one of --predictions and --baseline\n";
        return 1;
      }
      std::optional<BaselineMode> baseline;
      if (!baseline_name.empty()) baseline = baseline_mode_from_string(baseline_name);
      const std::uint64_t seed = cli.seed ? *cli.seed : config.train.base_seed;
      run_evaluate(config, eval_split, predictions_path, baseline, by_length, seed, std::cerr);
      store_config(config, "evaluate");
    } else if (synth_cmd->parsed()) {
      const ExperimentConfig config = cli.load();
      run_synth(config.synth, config.out_dir, std::cerr);
      store_config(config, "synth");
    }
  } catch (const DivergedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const TrainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const EvalError& e) {
    // Covers bad --baseline names as usage; data-shaped eval errors are
    // misalignments, which the pipeline wraps as PipelineError.
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
