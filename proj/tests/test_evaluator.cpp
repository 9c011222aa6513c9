#include <doctest.h>

#include <cmath>
#include <map>

#include "grind/evaluator.hpp"

using namespace grind;

namespace {

SpanSet spans(std::initializer_list<std::pair<std::int32_t, std::int32_t>> list) {
  return SpanSet(list.begin(), list.end());
}

std::vector<Span> labeled(std::initializer_list<Span> list) { return {list}; }

}  // namespace

TEST_SUITE("evaluator") {

TEST_CASE("filter drops trivial spans and duplicates") {
  const std::vector<Span> in = {{0, 3, "S"}, {0, 2, "NP"}, {2, 3, "VP"}, {0, 2, "NP"}};
  CHECK(filter_spans(in, 3) == spans({{0, 2}}));
  CHECK(filter_spans({{0, 2, "S"}, {0, 1, "NP"}, {1, 2, "VP"}}, 2).empty());
  CHECK(filter_labeled_spans(in, 3) == labeled({{0, 2, "NP"}}));
  CHECK_THROWS_AS(filter_spans({{0, 4, "S"}}, 3), EvalError);
}

TEST_CASE("identical span sets score 100") {
  const SpanSet g = spans({{1, 3}, {3, 5}});
  const auto r = f1_scores({{g, g}});
  CHECK(r.corpus_f1 == 100.0);
  CHECK(r.sentence_f1 == 100.0);
}

TEST_CASE("half overlap scores 50") {
  const auto r = f1_scores({{spans({{1, 3}, {3, 5}}), spans({{1, 3}, {2, 5}})}});
  CHECK(r.corpus_f1 == 50.0);
  CHECK(r.sentence_f1 == 50.0);
}

TEST_CASE("micro and macro averages diverge as hand-computed") {
  // Sentence 1: gold size 1, perfect. Sentence 2: gold size 2, F1 50.
  const std::vector<std::pair<SpanSet, SpanSet>> pairs = {
      {spans({{1, 3}}), spans({{1, 3}})},
      {spans({{3, 5}, {5, 7}}), spans({{3, 5}, {0, 2}})},
  };
  const auto r = f1_scores(pairs);
  CHECK(r.sentence_f1 == 75.0);
  CHECK(r.corpus_f1 == doctest::Approx(200.0 / 3.0).epsilon(1e-12));
  CHECK(r.scored_sentences == 2);
}

TEST_CASE("empty-gold sentences leave the macro mean but feed the micro counts") {
  const std::vector<std::pair<SpanSet, SpanSet>> pairs = {
      {spans({{1, 3}}), spans({{1, 3}})},
      {SpanSet{}, spans({{0, 2}})},
  };
  const auto r = f1_scores(pairs);
  CHECK(r.sentence_f1 == 100.0);
  CHECK(r.scored_sentences == 1);
  CHECK(r.corpus_f1 == doctest::Approx(200.0 / 3.0).epsilon(1e-12));  // TP 1, pred 2, gold 1
  CHECK_THROWS_AS(f1_scores({}), EvalError);
}

TEST_CASE("a non-empty gold sentence with no prediction scores zero") {
  const auto r = f1_scores({{spans({{1, 3}}), SpanSet{}}});
  CHECK(r.sentence_f1 == 0.0);
  CHECK(r.corpus_f1 == 0.0);
}

TEST_CASE("label recall counts unlabeled matches per label") {
  const std::vector<std::vector<Span>> gold = {labeled({{0, 2, "NP"}, {2, 5, "VP"}})};
  const std::vector<SpanSet> pred = {spans({{0, 2}})};
  const auto r = label_recall(gold, pred, {"NP", "VP", "PP"});
  CHECK(r.at("NP") == 100.0);
  CHECK(r.at("VP") == 0.0);
  CHECK_FALSE(r.at("PP").has_value());
}

TEST_CASE("predictions covering gold give every defined label 100") {
  const std::vector<std::vector<Span>> gold = {
      labeled({{0, 2, "NP"}, {2, 5, "VP"}}),
      labeled({{1, 4, "PP"}}),
  };
  const std::vector<SpanSet> pred = {spans({{0, 2}, {2, 5}, {1, 4}}), spans({{1, 4}})};
  for (const auto& [label, value] : label_recall(gold, pred, {"NP", "VP", "PP"})) {
    (void)label;
    REQUIRE(value.has_value());
    CHECK(*value == 100.0);
  }
}

TEST_CASE("recall is monotone under added predictions") {
  Rng rng(21);
  const std::vector<std::string> labels = {"NP", "VP"};
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::vector<Span>> gold(3);
    std::vector<SpanSet> small(3), big(3);
    for (int s = 0; s < 3; ++s) {
      const std::int32_t n = 6;
      for (int k = 0; k < 4; ++k) {
        const auto start = static_cast<std::int32_t>(rng.below(n - 2));
        const auto end = start + 2 + static_cast<std::int32_t>(rng.below(n - start - 2));
        gold[s].push_back({start, end, rng.below(2) ? "NP" : "VP"});
        if (rng.below(2)) small[s].emplace(start, end);
        big[s].emplace(start, end);
      }
      gold[s] = filter_labeled_spans(gold[s], n);
      if (rng.below(2)) big[s].emplace(0, 2);
    }
    const auto lo = label_recall(gold, small, labels);
    const auto hi = label_recall(gold, big, labels);
    for (const auto& label : labels) {
      if (lo.at(label).has_value()) {
        CHECK(*hi.at(label) >= *lo.at(label));
      }
    }
  }
}

TEST_CASE("length buckets score per width") {
  const std::vector<std::vector<Span>> gold = {labeled({{0, 2, "NP"}, {0, 4, "VP"}})};
  const std::vector<SpanSet> pred = {spans({{0, 2}})};
  const auto b = length_breakdown(gold, pred);
  CHECK(b.buckets.at(2).f1 == 100.0);
  CHECK(b.buckets.at(2).gold_count == 1);
  CHECK(b.buckets.at(4).f1 == 0.0);
  CHECK(b.buckets.at(4).gold_count == 1);

  double all_mass = 0.0;
  for (const auto& [width, frac] : b.label_width_dist.at("All")) {
    (void)width;
    all_mass += frac;
  }
  CHECK(all_mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b.label_width_dist.at("NP").at(2) == 1.0);
}

TEST_CASE("bucket gold counts sum to the corpus gold total") {
  Rng rng(22);
  std::vector<std::vector<Span>> gold(4);
  std::vector<SpanSet> pred(4);
  std::int64_t total = 0;
  for (int s = 0; s < 4; ++s) {
    const std::int32_t n = 8;
    std::vector<Span> raw;
    for (int k = 0; k < 5; ++k) {
      const auto start = static_cast<std::int32_t>(rng.below(n - 2));
      const auto end = start + 2 + static_cast<std::int32_t>(rng.below(n - start - 2));
      raw.push_back({start, end, "X"});
    }
    gold[s] = filter_labeled_spans(raw, n);
    pred[s] = baseline_tree(BaselineMode::kRandom, n, rng);
    SpanSet dedup;
    for (const Span& sp : gold[s]) dedup.emplace(sp.start, sp.end);
    total += static_cast<std::int64_t>(dedup.size());
  }
  const auto b = length_breakdown(gold, pred);
  std::int64_t bucket_total = 0;
  for (const auto& [width, bucket] : b.buckets) {
    (void)width;
    bucket_total += bucket.gold_count;
  }
  CHECK(bucket_total == total);
}

TEST_CASE("branching baselines match their closed forms") {
  CHECK(baseline_tree(BaselineMode::kRight, 4, 0) == spans({{1, 4}, {2, 4}}));
  CHECK(baseline_tree(BaselineMode::kLeft, 4, 0) == spans({{0, 2}, {0, 3}}));
  CHECK(baseline_tree(BaselineMode::kLeft, 2, 0).empty());
  CHECK(baseline_tree(BaselineMode::kRight, 2, 0).empty());
  CHECK_THROWS_AS(baseline_tree(BaselineMode::kLeft, 1, 0), EvalError);
  CHECK(baseline_mode_from_string("left") == BaselineMode::kLeft);
  CHECK_THROWS_AS(baseline_mode_from_string("middle"), EvalError);
}

TEST_CASE("random baseline is uniform over the five 4-leaf shapes") {
  Rng rng(23);
  std::map<SpanSet, int> freq;
  const int samples = 10000;
  for (int s = 0; s < samples; ++s) ++freq[baseline_tree(BaselineMode::kRandom, 4, rng)];
  CHECK(freq.size() == 5);
  for (const auto& [shape, count] : freq) {
    (void)shape;
    CHECK(std::abs(count / double(samples) - 0.2) < 0.02);
  }
}

TEST_CASE("random baseline is deterministic under a fixed seed") {
  CHECK(baseline_tree(BaselineMode::kRandom, 10, 77) ==
        baseline_tree(BaselineMode::kRandom, 10, 77));
}

TEST_CASE("evaluate_corpus assembles the full report") {
  GoldTree t1 = parse_bracketed("(S (NP (D the) (N dog)) (VP (V ran)))");
  GoldTree t2 = parse_bracketed("(S (NP (D a) (N cat)) (VP (V sat) (PP (P on) (N mats))))");
  const std::vector<GoldTree> gold = {t1, t2};
  std::vector<std::vector<Span>> pred(2);
  pred[0] = {{0, 2, "X"}};
  pred[1] = {{0, 2, "X"}, {2, 5, "X"}, {3, 5, "X"}};
  const auto report = evaluate_corpus(gold, pred, kDefaultRecallLabels);
  CHECK(report.corpus_f1 == 100.0);
  CHECK(report.sentence_f1 == 100.0);
  CHECK(report.sentence_count == 2);
  CHECK(report.recall.at("NP") == 100.0);
  CHECK(report.recall.at("VP") == 100.0);
  CHECK(report.recall.at("PP") == 100.0);
  CHECK_FALSE(report.recall.at("SBAR").has_value());

  const auto j = report_to_json(report);
  CHECK(j["corpus_f1"] == 100.0);
  CHECK(j["label_recall"]["SBAR"].is_null());
  const std::string csv = report_csv(report);
  CHECK(csv.find("label_recall,SBAR,,NA") != std::string::npos);
  CHECK(csv.find("corpus_f1,,,100.0") != std::string::npos);

  CHECK_THROWS_AS(evaluate_corpus(gold, {pred[0]}, kDefaultRecallLabels), EvalError);
}

}  // TEST_SUITE
