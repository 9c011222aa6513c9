// End-to-end commands over preprocessed corpora: each run_* function is the
// body of one CLI subcommand. Every output file is written atomically and
// depends only on the inputs and the seed, never on wall time, so reruns are
// byte-identical. Progress and timing go to the log stream instead.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "grind/config.hpp"
#include "grind/evaluator.hpp"
#include "grind/synth.hpp"
#include "grind/trainer.hpp"

namespace grind {

// Data problems: missing or malformed files, checkpoint/vocab mismatches.
class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when every training seed aborted on a non-finite loss.
class DivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SplitCounts {
  std::int64_t loaded = 0;  // trees read from the bracketed file
  std::int64_t kept = 0;    // sentences surviving punctuation and length filters
};

struct PreprocessSummary {
  SplitCounts train, valid, test;
  std::int64_t vocab_size = 0;
  std::string vocab_path, train_path, valid_path, test_path;
};

// Bracketed splits -> vocab.json + {train,valid,test}.jsonl under out_dir.
// Punctuation is stripped everywhere; the length cap applies to train only.
PreprocessSummary run_preprocess(const ExperimentConfig& config, std::ostream& log);

struct SeedSummary {
  std::uint64_t seed = 0;
  bool diverged = false;
  std::int64_t epoch = -1;
  double val_perplexity = 0.0;
  std::string checkpoint_path;  // empty for a diverged seed
};

struct TrainSummary {
  std::vector<SeedSummary> seeds;
  std::string log_path;
};

// Trains on out_dir/{train,valid}.jsonl; writes train_log.jsonl and one
// checkpoint_seed<N>.grnd per surviving seed. Throws DivergedError when no
// seed finishes an epoch with a finite loss.
TrainSummary run_train(const ExperimentConfig& config, std::ostream& log);

struct ParseSummary {
  std::int64_t sentences = 0;
  bool z_used = false;
  std::string jsonl_path, trees_path;
};

// Decodes one split with a checkpoint. Rule tables come from the posterior
// mean of each sentence when the grammar conditions on z, and from a single
// shared table otherwise (no encoder pass; the log says so).
ParseSummary run_parse(const ExperimentConfig& config, const std::string& checkpoint_path,
                       const std::string& split, std::ostream& log);

struct EvalSummary {
  EvalReport report;
  std::string json_path, csv_path;
  std::string by_length_path;  // empty unless by_length was requested
};

// Scores predictions (a parse jsonl file) or a baseline against the gold
// trees of one split. `seed` drives the random baseline only.
EvalSummary run_evaluate(const ExperimentConfig& config, const std::string& split,
                         const std::string& predictions_path,
                         const std::optional<BaselineMode>& baseline, bool by_length,
                         std::uint64_t seed, std::ostream& log);

struct SynthSummary {
  std::int64_t train = 0, valid = 0, test = 0;
  double acceptance = 0.0;
  int draws_used = 1;
  std::string train_path, valid_path, test_path;
};

// Samples a random PCFG and a treebank from it; writes bracketed
// {train,valid,test}.trees under out_dir, ready for run_preprocess.
SynthSummary run_synth(const SynthConfig& config, const std::string& out_dir,
                       std::ostream& log);

}  // namespace grind
