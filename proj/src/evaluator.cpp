#include "grind/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace grind {

const std::vector<std::string> kDefaultRecallLabels = {"NP", "VP", "PP", "SBAR", "ADJP", "ADVP"};

namespace {

bool trivial(std::int32_t start, std::int32_t end, std::int32_t n) {
  return end - start <= 1 || (start == 0 && end == n);
}

void check_span(const Span& s, std::int32_t n) {
  if (s.start < 0 || s.end > n || s.start >= s.end) {
    throw EvalError("span (" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                    ") invalid for sentence length " + std::to_string(n));
  }
}

double percent_f1(std::int64_t tp, std::int64_t pred, std::int64_t gold) {
  if (pred + gold == 0) return 0.0;
  return 200.0 * static_cast<double>(tp) / static_cast<double>(pred + gold);
}

}  // namespace

SpanSet filter_spans(const std::vector<Span>& spans, std::int32_t n) {
  SpanSet out;
  for (const Span& s : spans) {
    check_span(s, n);
    if (!trivial(s.start, s.end, n)) out.emplace(s.start, s.end);
  }
  return out;
}

std::vector<Span> filter_labeled_spans(const std::vector<Span>& spans, std::int32_t n) {
  std::vector<Span> out;
  for (const Span& s : spans) {
    check_span(s, n);
    if (!trivial(s.start, s.end, n)) out.push_back(s);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

F1Result f1_scores(const std::vector<std::pair<SpanSet, SpanSet>>& pairs) {
  if (pairs.empty()) throw EvalError("f1_scores needs at least one sentence");
  std::int64_t tp_total = 0, pred_total = 0, gold_total = 0;
  double macro_sum = 0.0;
  std::int64_t scored = 0;
  for (const auto& [gold, pred] : pairs) {
    std::int64_t tp = 0;
    for (const auto& span : pred) tp += gold.count(span);
    tp_total += tp;
    pred_total += static_cast<std::int64_t>(pred.size());
    gold_total += static_cast<std::int64_t>(gold.size());
    if (!gold.empty()) {
      macro_sum += percent_f1(tp, static_cast<std::int64_t>(pred.size()),
                              static_cast<std::int64_t>(gold.size()));
      ++scored;
    }
  }
  F1Result r;
  r.corpus_f1 = percent_f1(tp_total, pred_total, gold_total);
  r.sentence_f1 = scored > 0 ? macro_sum / static_cast<double>(scored) : 0.0;
  r.scored_sentences = scored;
  return r;
}

std::map<std::string, std::optional<double>> label_recall(
    const std::vector<std::vector<Span>>& gold_labeled, const std::vector<SpanSet>& predicted,
    const std::vector<std::string>& labels) {
  if (gold_labeled.size() != predicted.size()) {
    throw EvalError("label_recall: " + std::to_string(gold_labeled.size()) + " gold vs " +
                    std::to_string(predicted.size()) + " predicted sentences");
  }
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> hits;  // label -> (hit, total)
  for (const std::string& label : labels) hits[label] = {0, 0};
  for (std::size_t i = 0; i < gold_labeled.size(); ++i) {
    for (const Span& s : gold_labeled[i]) {
      auto it = hits.find(s.label);
      if (it == hits.end()) continue;
      ++it->second.second;
      if (predicted[i].count({s.start, s.end})) ++it->second.first;
    }
  }
  std::map<std::string, std::optional<double>> out;
  for (const std::string& label : labels) {
    const auto& [hit, total] = hits[label];
    if (total == 0) {
      out[label] = std::nullopt;
    } else {
      out[label] = 100.0 * static_cast<double>(hit) / static_cast<double>(total);
    }
  }
  return out;
}

LengthBreakdown length_breakdown(const std::vector<std::vector<Span>>& gold_labeled,
                                 const std::vector<SpanSet>& predicted) {
  if (gold_labeled.size() != predicted.size()) {
    throw EvalError("length_breakdown: gold and predicted sentence counts differ");
  }
  LengthBreakdown out;
  std::map<std::string, std::int64_t> label_totals;
  std::map<std::string, std::map<std::int32_t, std::int64_t>> label_width_counts;
  for (std::size_t i = 0; i < gold_labeled.size(); ++i) {
    SpanSet gold_set;
    for (const Span& s : gold_labeled[i]) {
      const std::int32_t width = s.end - s.start;
      gold_set.emplace(s.start, s.end);
      ++label_width_counts[s.label][width];
      ++label_totals[s.label];
      ++label_width_counts["All"][width];
      ++label_totals["All"];
    }
    // Gold counts use the unlabeled set so they match the F1 micro counts
    // even when one span carries two labels.
    for (const auto& span : gold_set) {
      LengthBucket& b = out.buckets[span.second - span.first];
      ++b.gold_count;
      if (predicted[i].count(span)) ++b.true_positives;
    }
    for (const auto& span : predicted[i]) {
      ++out.buckets[span.second - span.first].predicted_count;
    }
  }
  for (auto& [width, bucket] : out.buckets) {
    bucket.f1 = percent_f1(bucket.true_positives, bucket.predicted_count, bucket.gold_count);
  }
  for (const auto& [label, widths] : label_width_counts) {
    const double total = static_cast<double>(label_totals[label]);
    for (const auto& [width, count] : widths) {
      out.label_width_dist[label][width] = static_cast<double>(count) / total;
    }
  }
  return out;
}

BaselineMode baseline_mode_from_string(const std::string& name) {
  if (name == "left") return BaselineMode::kLeft;
  if (name == "right") return BaselineMode::kRight;
  if (name == "random") return BaselineMode::kRandom;
  throw EvalError("unknown baseline '" + name + "' (expected left, right, or random)");
}

namespace {

// catalan(m) = number of binary trees over m leaves = Catalan(m - 1).
const std::vector<double>& catalan_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(600);
    t[1] = 1.0;
    for (std::size_t m = 2; m < t.size(); ++m) {
      // Catalan recurrence C_k = C_{k-1} * 2(2k - 1) / (k + 1) with k = m - 1.
      const double k = static_cast<double>(m - 1);
      t[m] = t[m - 1] * 2.0 * (2.0 * k - 1.0) / (k + 1.0);
    }
    return t;
  }();
  return table;
}

void sample_shape(std::int32_t lo, std::int32_t hi, std::int32_t n, Rng& rng, SpanSet& out) {
  const std::int32_t m = hi - lo;
  if (m < 2) return;
  if (!trivial(lo, hi, n)) out.emplace(lo, hi);
  const auto& cat = catalan_table();
  if (static_cast<std::size_t>(m) >= cat.size()) {
    throw EvalError("random baseline supports sentences up to " +
                    std::to_string(cat.size() - 1) + " tokens");
  }
  // Split into (l, m - l) leaves with probability proportional to the number
  // of shapes on each side; the weights sum to catalan(m) exactly.
  const double u = rng.uniform() * cat[m];
  double acc = 0.0;
  std::int32_t l = 1;
  for (; l < m - 1; ++l) {
    acc += cat[l] * cat[m - l];
    if (u < acc) break;
  }
  sample_shape(lo, lo + l, n, rng, out);
  sample_shape(lo + l, hi, n, rng, out);
}

}  // namespace

SpanSet baseline_tree(BaselineMode mode, std::int32_t n, Rng& rng) {
  if (n < 2) throw EvalError("baseline trees need at least 2 tokens");
  SpanSet out;
  switch (mode) {
    case BaselineMode::kLeft:
      for (std::int32_t k = 2; k <= n - 1; ++k) out.emplace(0, k);
      return out;
    case BaselineMode::kRight:
      for (std::int32_t k = 1; k <= n - 2; ++k) out.emplace(k, n);
      return out;
    case BaselineMode::kRandom:
      sample_shape(0, n, n, rng, out);
      return out;
  }
  throw EvalError("unreachable baseline mode");
}

SpanSet baseline_tree(BaselineMode mode, std::int32_t n, std::uint64_t seed) {
  Rng rng(seed);
  return baseline_tree(mode, n, rng);
}

EvalReport evaluate_corpus(const std::vector<GoldTree>& gold,
                           const std::vector<std::vector<Span>>& predicted,
                           const std::vector<std::string>& labels) {
  if (gold.size() != predicted.size()) {
    throw EvalError("sentence count mismatch: " + std::to_string(gold.size()) + " gold vs " +
                    std::to_string(predicted.size()) + " predicted (first missing index " +
                    std::to_string(std::min(gold.size(), predicted.size())) + ")");
  }
  if (gold.empty()) throw EvalError("evaluate_corpus needs at least one sentence");

  std::vector<std::pair<SpanSet, SpanSet>> pairs;
  std::vector<std::vector<Span>> gold_labeled;
  std::vector<SpanSet> pred_sets;
  pairs.reserve(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::int32_t n = static_cast<std::int32_t>(gold[i].tokens.size());
    SpanSet pred;
    try {
      pred = filter_spans(predicted[i], n);
    } catch (const EvalError& e) {
      throw EvalError("sentence " + std::to_string(i) + ": " + e.what());
    }
    pairs.emplace_back(filter_spans(gold[i].spans, n), pred);
    gold_labeled.push_back(filter_labeled_spans(gold[i].spans, n));
    pred_sets.push_back(std::move(pred));
  }

  EvalReport report;
  const F1Result f1 = f1_scores(pairs);
  report.corpus_f1 = f1.corpus_f1;
  report.sentence_f1 = f1.sentence_f1;
  report.scored_sentences = f1.scored_sentences;
  report.sentence_count = static_cast<std::int64_t>(gold.size());
  report.recall = label_recall(gold_labeled, pred_sets, labels);
  report.by_length = length_breakdown(gold_labeled, pred_sets);
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["corpus_f1"] = report.corpus_f1;
  j["sentence_f1"] = report.sentence_f1;
  j["sentence_count"] = report.sentence_count;
  j["scored_sentences"] = report.scored_sentences;
  j["label_recall"] = nlohmann::json::object();
  for (const auto& [label, value] : report.recall) {
    if (value.has_value()) {
      j["label_recall"][label] = *value;
    } else {
      j["label_recall"][label] = nullptr;
    }
  }
  j["by_length"] = nlohmann::json::object();
  for (const auto& [width, bucket] : report.by_length.buckets) {
    nlohmann::json row;
    row["f1"] = bucket.f1;
    row["gold_count"] = bucket.gold_count;
    row["predicted_count"] = bucket.predicted_count;
    row["true_positives"] = bucket.true_positives;
    j["by_length"][std::to_string(width)] = row;
  }
  j["label_width_dist"] = nlohmann::json::object();
  for (const auto& [label, dist] : report.by_length.label_width_dist) {
    nlohmann::json row = nlohmann::json::object();
    for (const auto& [width, frac] : dist) row[std::to_string(width)] = frac;
    j["label_width_dist"][label] = row;
  }
  return j;
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  const auto num = [](double v) {
    nlohmann::json j = v;  // shortest round-trip formatting, matching the JSON
    return j.dump();
  };
  os << "metric,label,length,value\n";
  os << "corpus_f1,,," << num(report.corpus_f1) << "\n";
  os << "sentence_f1,,," << num(report.sentence_f1) << "\n";
  os << "sentence_count,,," << report.sentence_count << "\n";
  os << "scored_sentences,,," << report.scored_sentences << "\n";
  for (const auto& [label, value] : report.recall) {
    os << "label_recall," << label << ",," << (value.has_value() ? num(*value) : "NA") << "\n";
  }
  for (const auto& [width, bucket] : report.by_length.buckets) {
    os << "length_f1,," << width << "," << num(bucket.f1) << "\n";
    os << "length_gold_count,," << width << "," << bucket.gold_count << "\n";
  }
  for (const auto& [label, dist] : report.by_length.label_width_dist) {
    for (const auto& [width, frac] : dist) {
      os << "label_width_dist," << label << "," << width << "," << num(frac) << "\n";
    }
  }
  return os.str();
}

}  // namespace grind
