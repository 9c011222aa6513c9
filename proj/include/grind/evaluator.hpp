// Unlabeled constituency evaluation: trivial-span filtering, corpus-level
// (micro) and sentence-level (macro) F1 in percent, per-label recall with an
// explicit undefined marker, width-bucketed breakdowns, and the three
// parameter-free baselines (left branching, right branching, uniform random
// binary trees).

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "grind/rng.hpp"
#include "grind/treebank.hpp"

namespace grind {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unlabeled span set after trivial-span filtering; set semantics.
using SpanSet = std::set<std::pair<std::int32_t, std::int32_t>>;

// The six labels reported in the reference evaluation.
extern const std::vector<std::string> kDefaultRecallLabels;

// Drops width-1 spans and the whole-sentence span (0, n); deduplicates.
SpanSet filter_spans(const std::vector<Span>& spans, std::int32_t n);

// Same filter but keeping labels, for recall and distribution metrics.
// Deduplicates by (start, end, label).
std::vector<Span> filter_labeled_spans(const std::vector<Span>& spans, std::int32_t n);

struct F1Result {
  double corpus_f1 = 0.0;    // micro over summed TP / predicted / gold
  double sentence_f1 = 0.0;  // macro over sentences with non-empty gold
  std::int64_t scored_sentences = 0;  // sentences entering the macro mean
};

// Both sides must already be filtered. Sentences whose gold set is empty are
// excluded from the sentence-level mean but still enter the micro counts.
F1Result f1_scores(const std::vector<std::pair<SpanSet, SpanSet>>& pairs);

// recall(L) over the corpus, in percent; a label with no gold occurrences
// maps to nullopt (undefined, distinct from 0).
std::map<std::string, std::optional<double>> label_recall(
    const std::vector<std::vector<Span>>& gold_labeled, const std::vector<SpanSet>& predicted,
    const std::vector<std::string>& labels);

struct LengthBucket {
  double f1 = 0.0;
  std::int64_t gold_count = 0;
  std::int64_t predicted_count = 0;
  std::int64_t true_positives = 0;
};

struct LengthBreakdown {
  // Keyed by span width; every width present in gold or predictions appears.
  std::map<std::int32_t, LengthBucket> buckets;
  // Per label, the distribution of gold-span widths normalized over that
  // label's total; the "All" row aggregates every gold span.
  std::map<std::string, std::map<std::int32_t, double>> label_width_dist;
};

LengthBreakdown length_breakdown(const std::vector<std::vector<Span>>& gold_labeled,
                                 const std::vector<SpanSet>& predicted);

enum class BaselineMode { kLeft, kRight, kRandom };

BaselineMode baseline_mode_from_string(const std::string& name);

// Non-trivial spans of a deterministic branching tree or, for kRandom, of a
// shape drawn uniformly over all Catalan(n-1) binary trees via
// Catalan-weighted split sampling. n >= 2; n = 2 yields the empty set.
SpanSet baseline_tree(BaselineMode mode, std::int32_t n, Rng& rng);
SpanSet baseline_tree(BaselineMode mode, std::int32_t n, std::uint64_t seed);

struct EvalReport {
  double corpus_f1 = 0.0;
  double sentence_f1 = 0.0;
  std::int64_t sentence_count = 0;
  std::int64_t scored_sentences = 0;
  std::map<std::string, std::optional<double>> recall;
  LengthBreakdown by_length;
};

// Full pipeline over aligned gold trees and predicted span lists. Throws on
// count or token-length misalignment, naming the first mismatched index.
EvalReport evaluate_corpus(const std::vector<GoldTree>& gold,
                           const std::vector<std::vector<Span>>& predicted,
                           const std::vector<std::string>& labels);

nlohmann::json report_to_json(const EvalReport& report);

// One flat table keyed (metric, label, length); undefined values print "NA".
std::string report_csv(const EvalReport& report);

}  // namespace grind
