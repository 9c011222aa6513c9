#include "grind/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <unordered_set>

#include "grind/chart.hpp"
#include "grind/serialize.hpp"
#include "grind/variational.hpp"

namespace grind {

namespace {

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw PipelineError("cannot create directory " + dir + ": " + ec.message());
}

SplitTag tag_from_split(const std::string& split) {
  if (split == "train") return SplitTag::kTrain;
  if (split == "valid") return SplitTag::kValid;
  if (split == "test") return SplitTag::kTest;
  throw PipelineError("unknown split '" + split + "' (expected train, valid, or test)");
}

Corpus load_split(const ExperimentConfig& config, const std::string& split) {
  return read_corpus_jsonl(join(config.out_dir, split + ".jsonl"), tag_from_split(split));
}

struct Stopwatch {
  std::chrono::steady_clock::time_point begin = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
  }
};

}  // namespace

PreprocessSummary run_preprocess(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  ensure_dir(config.out_dir);

  const std::unordered_set<std::string> punct(kDefaultPunctTags.begin(),
                                              kDefaultPunctTags.end());
  TreebankSplits stripped;
  PreprocessSummary summary;
  const struct {
    const char* name;
    const std::string* path;
    std::vector<GoldTree>* out;
    SplitCounts* counts;
  } jobs[] = {
      {"train", &config.train_path, &stripped.train, &summary.train},
      {"valid", &config.val_path, &stripped.valid, &summary.valid},
      {"test", &config.test_path, &stripped.test, &summary.test},
  };
  for (const auto& job : jobs) {
    const std::vector<GoldTree> raw = load_bracketed_file(*job.path);
    job.counts->loaded = static_cast<std::int64_t>(raw.size());
    for (const GoldTree& tree : raw) {
      if (auto kept = strip_punctuation(tree, punct)) job.out->push_back(std::move(*kept));
    }
  }

  const Vocab vocab = build_vocab(stripped.train, static_cast<std::size_t>(config.vocab_cap));
  const CorpusSplits splits = make_splits(stripped, vocab, config.train.max_train_len);

  summary.train.kept = static_cast<std::int64_t>(splits.train.sentences.size());
  summary.valid.kept = static_cast<std::int64_t>(splits.valid.sentences.size());
  summary.test.kept = static_cast<std::int64_t>(splits.test.sentences.size());
  summary.vocab_size = vocab.size();
  summary.vocab_path = join(config.out_dir, "vocab.json");
  summary.train_path = join(config.out_dir, "train.jsonl");
  summary.valid_path = join(config.out_dir, "valid.jsonl");
  summary.test_path = join(config.out_dir, "test.jsonl");

  write_vocab(summary.vocab_path, vocab);
  write_corpus_jsonl(summary.train_path, splits.train);
  write_corpus_jsonl(summary.valid_path, splits.valid);
  write_corpus_jsonl(summary.test_path, splits.test);

  log << "vocab: " << vocab.size() << " tokens (cap " << config.vocab_cap << ")\n";
  for (const auto& job : jobs) {
    log << job.name << ": loaded " << job.counts->loaded << ", kept " << job.counts->kept
        << "\n";
    if (job.counts->kept == 0) {
      log << "warning: " << job.name << " is empty after filtering\n";
    }
  }
  return summary;
}

TrainSummary run_train(const ExperimentConfig& config, std::ostream& log) {
  const Corpus train_corpus = load_split(config, "train");
  const Corpus val_corpus = load_split(config, "valid");
  const Vocab vocab = load_vocab(join(config.out_dir, "vocab.json"));

  TrainConfig tc = config.train;
  if (tc.grammar.vocab_size == 0) tc.grammar.vocab_size = vocab.size();
  if (tc.grammar.vocab_size != vocab.size()) {
    throw PipelineError("grammar vocab_size " + std::to_string(tc.grammar.vocab_size) +
                        " does not match vocab of " + std::to_string(vocab.size()));
  }
  if (tc.uses_z()) {
    if (tc.encoder.vocab_size == 0) tc.encoder.vocab_size = vocab.size();
    if (tc.encoder.vocab_size != vocab.size()) {
      throw PipelineError("encoder vocab_size " + std::to_string(tc.encoder.vocab_size) +
                          " does not match vocab of " + std::to_string(vocab.size()));
    }
  }
  tc.validate();

  Stopwatch watch;
  std::string log_lines;
  const TrainResult result = train(tc, train_corpus, val_corpus,
                                   [&](const nlohmann::json& record) {
                                     log_lines += dump_json(record);
                                     log_lines += '\n';
                                     log << "epoch " << record.at("epoch").get<std::int64_t>()
                                         << " seed " << record.at("seed").get<std::uint64_t>()
                                         << " val_perplexity "
                                         << record.at("val_perplexity").get<double>() << "\n";
                                   });

  TrainSummary summary;
  summary.log_path = join(config.out_dir, "train_log.jsonl");
  atomic_write_file(summary.log_path, log_lines);

  for (const SeedOutcome& outcome : result.seeds) {
    SeedSummary s;
    s.seed = outcome.seed;
    s.diverged = outcome.diverged;
    if (outcome.diverged) {
      log << "warning: " << outcome.diagnostic << "\n";
    } else {
      s.epoch = outcome.best.epoch;
      s.val_perplexity = outcome.best.val_perplexity;
      s.checkpoint_path =
          join(config.out_dir, "checkpoint_seed" + std::to_string(outcome.seed) + ".grnd");
      outcome.best.save(s.checkpoint_path);
    }
    summary.seeds.push_back(std::move(s));
  }
  log << "trained " << result.checkpoints().size() << "/" << result.seeds.size()
      << " seeds in " << watch.seconds() << "s\n";
  if (result.checkpoints().empty()) {
    throw DivergedError("every seed diverged; no checkpoint written");
  }
  return summary;
}

ParseSummary run_parse(const ExperimentConfig& config, const std::string& checkpoint_path,
                       const std::string& split, std::ostream& log) {
  const Checkpoint checkpoint = Checkpoint::load(checkpoint_path);
  const Vocab vocab = load_vocab(join(config.out_dir, "vocab.json"));
  if (checkpoint.grammar.vocab_size != vocab.size()) {
    throw PipelineError("checkpoint vocab_size " +
                        std::to_string(checkpoint.grammar.vocab_size) +
                        " does not match vocab of " + std::to_string(vocab.size()));
  }
  const Corpus corpus = load_split(config, split);

  ParseSummary summary;
  summary.z_used = checkpoint.grammar.uses_z();
  summary.sentences = static_cast<std::int64_t>(corpus.sentences.size());
  summary.jsonl_path = join(config.out_dir, "parsed_" + split + ".jsonl");
  summary.trees_path = join(config.out_dir, "parsed_" + split + ".trees");

  Stopwatch watch;
  std::optional<RuleTables> shared;
  if (!summary.z_used) {
    log << "grammar is fully shared; z unused, decoding with one rule table\n";
    shared = tables_from_batch(rule_table(checkpoint.params, checkpoint.grammar, std::nullopt),
                               0);
  }

  std::string jsonl, trees;
  for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
    const Sentence& sentence = corpus.sentences[i];
    RuleTables tables =
        shared ? *shared
               : tables_from_batch(
                     rule_table(checkpoint.params, checkpoint.grammar,
                                map_embedding(encode(sentence.ids, checkpoint.encoder,
                                                     checkpoint.params))),
                     0);
    const auto [tree, score] = viterbi_parse(sentence.ids, tables);

    nlohmann::json record;
    record["index"] = i;
    record["tokens"] = sentence.tree.tokens;
    nlohmann::json spans = nlohmann::json::array();
    for (const ParseNode& node : tree.nodes) {
      if (node.split < 0) continue;
      spans.push_back(nlohmann::json::array({node.start, node.end, node.split}));
    }
    record["spans"] = std::move(spans);
    record["log_score"] = score;
    jsonl += dump_json(record);
    jsonl += '\n';
    trees += tree_bracket_string(tree, sentence.tree.tokens);
    trees += '\n';
  }
  atomic_write_file(summary.jsonl_path, jsonl);
  atomic_write_file(summary.trees_path, trees);
  log << "parsed " << summary.sentences << " sentences from " << split << " in "
      << watch.seconds() << "s\n";
  return summary;
}

EvalSummary run_evaluate(const ExperimentConfig& config, const std::string& split,
                         const std::string& predictions_path,
                         const std::optional<BaselineMode>& baseline, bool by_length,
                         std::uint64_t seed, std::ostream& log) {
  const Corpus corpus = load_split(config, split);
  std::vector<GoldTree> gold;
  gold.reserve(corpus.sentences.size());
  for (const Sentence& s : corpus.sentences) gold.push_back(s.tree);

  std::string stem = "eval_" + split;
  std::vector<std::vector<Span>> predicted;
  if (baseline) {
    const char* names[] = {"left", "right", "random"};
    stem += "_";
    stem += names[static_cast<int>(*baseline)];
    Rng rng(seed);
    for (const GoldTree& g : gold) {
      const SpanSet shape =
          baseline_tree(*baseline, static_cast<std::int32_t>(g.tokens.size()), rng);
      std::vector<Span> spans;
      spans.reserve(shape.size());
      for (const auto& [s, e] : shape) spans.push_back(Span{s, e, "X"});
      predicted.push_back(std::move(spans));
    }
  } else {
    std::ifstream in(predictions_path);
    if (!in) throw PipelineError("cannot open predictions file " + predictions_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      nlohmann::json record;
      try {
        record = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw PipelineError(predictions_path + ":" + std::to_string(lineno) + ": " + e.what());
      }
      std::vector<Span> spans;
      for (const auto& triple : record.at("spans")) {
        spans.push_back(Span{triple.at(0).get<std::int32_t>(),
                             triple.at(1).get<std::int32_t>(), "X"});
      }
      predicted.push_back(std::move(spans));
    }
  }

  EvalSummary summary;
  try {
    summary.report = evaluate_corpus(gold, predicted, config.eval_labels);
  } catch (const EvalError& e) {
    throw PipelineError(e.what());  // misalignment is a data problem
  }
  summary.json_path = join(config.out_dir, stem + ".json");
  summary.csv_path = join(config.out_dir, stem + ".csv");

  nlohmann::json j = report_to_json(summary.report);
  j["split"] = split;
  j["source"] = baseline ? stem.substr(std::string("eval_" + split + "_").size())
                         : predictions_path;
  write_json_file(summary.json_path, j);
  atomic_write_file(summary.csv_path, report_csv(summary.report));

  if (by_length) {
    summary.by_length_path = join(config.out_dir, stem + "_by_length.csv");
    std::string csv = "width,f1,gold_count,predicted_count,true_positives\n";
    for (const auto& [width, bucket] : summary.report.by_length.buckets) {
      csv += std::to_string(width) + "," + dump_json(nlohmann::json(bucket.f1)) + "," +
             std::to_string(bucket.gold_count) + "," +
             std::to_string(bucket.predicted_count) + "," +
             std::to_string(bucket.true_positives) + "\n";
    }
    atomic_write_file(summary.by_length_path, csv);
  }

  log << "evaluated " << summary.report.sentence_count << " sentences: corpus F1 "
      << summary.report.corpus_f1 << ", sentence F1 " << summary.report.sentence_f1 << "\n";
  return summary;
}

SynthSummary run_synth(const SynthConfig& config, const std::string& out_dir,
                       std::ostream& log) {
  config.validate();
  ensure_dir(out_dir);

  Rng rng(config.seed);
  const SynthGrammar grammar = sample_synth_grammar(config, rng);
  if (!grammar.diagnostic.empty()) log << grammar.diagnostic;
  const TreebankSplits splits = sample_corpus(grammar, rng);

  SynthSummary summary;
  summary.train = static_cast<std::int64_t>(splits.train.size());
  summary.valid = static_cast<std::int64_t>(splits.valid.size());
  summary.test = static_cast<std::int64_t>(splits.test.size());
  summary.acceptance = grammar.acceptance;
  summary.draws_used = grammar.draws_used;
  summary.train_path = join(out_dir, "train.trees");
  summary.valid_path = join(out_dir, "valid.trees");
  summary.test_path = join(out_dir, "test.trees");

  const struct {
    const std::vector<GoldTree>* trees;
    const std::string* path;
  } jobs[] = {{&splits.train, &summary.train_path},
              {&splits.valid, &summary.valid_path},
              {&splits.test, &summary.test_path}};
  for (const auto& job : jobs) {
    std::string out;
    for (const GoldTree& tree : *job.trees) {
      out += bracket_string(tree.tokens, tree.pos_tags, tree.spans);
      out += '\n';
    }
    atomic_write_file(*job.path, out);
  }
  log << "sampled grammar (acceptance " << grammar.acceptance << ", draws "
      << grammar.draws_used << "); wrote " << summary.train << "/" << summary.valid << "/"
      << summary.test << " trees\n";
  return summary;
}

}  // namespace grind
