#include <doctest.h>

#include <cmath>
#include <set>

#include "grind/synth.hpp"

using namespace grind;

namespace {

std::string tree_string(const GoldTree& t) {
  return bracket_string(t.tokens, t.pos_tags, t.spans);
}

SynthConfig small_config() {
  SynthConfig c;
  c.n_nonterminals = 3;
  c.n_preterminals = 4;
  c.vocab_size = 12;
  c.train_sentences = 30;
  c.val_sentences = 10;
  c.test_sentences = 10;
  c.max_length = 12;
  c.seed = 13;
  return c;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("a productive grammar reports its exact length distribution") {
  Rng rng(13);
  const SynthGrammar g = sample_synth_grammar(small_config(), rng);
  CHECK(g.acceptance >= kMinAcceptance);
  CHECK(g.draws_used >= 1);
  REQUIRE(g.length_dist.size() == 13);
  CHECK(g.length_dist[0] == 0.0);
  CHECK(g.length_dist[1] == 0.0);
  double total = 0.0;
  for (double p : g.length_dist) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sampled trees are valid, vocabulary-bound, and length-capped") {
  Rng rng(14);
  const SynthGrammar g = sample_synth_grammar(small_config(), rng);
  for (int i = 0; i < 200; ++i) {
    const GoldTree t = sample_tree(g, rng);
    const auto n = static_cast<std::int64_t>(t.tokens.size());
    REQUIRE(n >= 2);
    REQUIRE(n <= g.config.max_length);
    REQUIRE(t.pos_tags.size() == t.tokens.size());
    CHECK(t.spans_well_nested());
    REQUIRE(!t.spans.empty());
    CHECK(t.spans[0].start == 0);
    CHECK(t.spans[0].end == n);
    for (const auto& tok : t.tokens) {
      CHECK(tok.front() == 'w');
      const std::int64_t v = std::stoll(tok.substr(1));
      CHECK(v >= 0);
      CHECK(v < g.config.vocab_size);
    }
  }
}

TEST_CASE("bracketed output round-trips through the treebank reader") {
  Rng rng(15);
  const SynthGrammar g = sample_synth_grammar(small_config(), rng);
  for (int i = 0; i < 50; ++i) {
    const GoldTree t = sample_tree(g, rng);
    const GoldTree back = parse_bracketed(tree_string(t));
    CHECK(back.tokens == t.tokens);
    CHECK(back.pos_tags == t.pos_tags);
    CHECK(back.spans == t.spans);
  }
}

TEST_CASE("sampled lengths follow the exact distribution") {
  Rng rng(16);
  const SynthGrammar g = sample_synth_grammar(small_config(), rng);
  const int samples = 4000;
  std::vector<int> counts(g.length_dist.size(), 0);
  for (int i = 0; i < samples; ++i) {
    ++counts[sample_tree(g, rng).tokens.size()];
  }
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double p = g.length_dist[k];
    const double freq = counts[k] / static_cast<double>(samples);
    const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / samples);
    CHECK(std::abs(freq - p) <= 4.0 * se + 0.005);
  }
}

TEST_CASE("corpus sampling is reproducible and split-sized") {
  const SynthConfig c = small_config();
  Rng rng_a(c.seed);
  const SynthGrammar ga = sample_synth_grammar(c, rng_a);
  const TreebankSplits a = sample_corpus(ga, rng_a);
  Rng rng_b(c.seed);
  const SynthGrammar gb = sample_synth_grammar(c, rng_b);
  const TreebankSplits b = sample_corpus(gb, rng_b);

  REQUIRE(a.train.size() == 30);
  REQUIRE(a.valid.size() == 10);
  REQUIRE(a.test.size() == 10);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(tree_string(a.train[i]) == tree_string(b.train[i]));
  }
  // Different seeds give different corpora.
  Rng rng_c(c.seed + 1);
  const SynthGrammar gc = sample_synth_grammar(c, rng_c);
  const TreebankSplits cc = sample_corpus(gc, rng_c);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    if (tree_string(a.train[i]) != tree_string(cc.train[i])) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("an unterminating grammar is rejected with diagnostics") {
  SynthConfig c = small_config();
  c.termination_bias = 1e-12;  // pair mass collapses onto nonterminal pairs
  Rng rng(17);
  try {
    sample_synth_grammar(c, rng);
    FAIL("expected SynthError");
  } catch (const SynthError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("unproductive") != std::string::npos);
    CHECK(msg.find("resampled") != std::string::npos);
  }
}

TEST_CASE("tree labels use the synthetic tag and nonterminal alphabets") {
  Rng rng(18);
  const SynthGrammar g = sample_synth_grammar(small_config(), rng);
  const GoldTree t = sample_tree(g, rng);
  for (const auto& tag : t.pos_tags) CHECK(tag.front() == 'T');
  std::set<std::string> labels;
  for (const auto& s : t.spans) labels.insert(s.label);
  for (const auto& label : labels) CHECK(label.front() == 'A');
}

}  // TEST_SUITE
