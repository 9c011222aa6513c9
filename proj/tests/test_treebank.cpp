#include <doctest.h>

#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include "grind/rng.hpp"
#include "grind/treebank.hpp"

using namespace grind;

namespace {

const std::unordered_set<std::string>& punct_set() {
  static const std::unordered_set<std::string> set(kDefaultPunctTags.begin(),
                                                   kDefaultPunctTags.end());
  return set;
}

std::vector<Span> spans_of(std::initializer_list<Span> list) {
  std::vector<Span> v(list);
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_SUITE("treebank") {

TEST_CASE("parse_bracketed reads a standard sentence") {
  const GoldTree t = parse_bracketed("(S (NP (DT the) (NN dog)) (VP (VBZ barks)))");
  CHECK(t.tokens == std::vector<std::string>{"the", "dog", "barks"});
  CHECK(t.pos_tags == std::vector<std::string>{"DT", "NN", "VBZ"});
  CHECK(t.spans == spans_of({{0, 3, "S"}, {0, 2, "NP"}, {2, 3, "VP"}}));
  CHECK(t.spans_well_nested());
}

TEST_CASE("parse_bracketed treats leaf pairs as tags, not spans") {
  const GoldTree t = parse_bracketed("(X (A a))");
  CHECK(t.tokens == std::vector<std::string>{"a"});
  CHECK(t.pos_tags == std::vector<std::string>{"A"});
  CHECK(t.spans == spans_of({{0, 1, "X"}}));
}

TEST_CASE("parse_bracketed reports the failing offset") {
  try {
    parse_bracketed("(S (NP");
    FAIL("expected a parse error");
  } catch (const TreebankError& e) {
    CHECK(std::string(e.what()).find("offset 6") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_bracketed(""), TreebankError);
  CHECK_THROWS_AS(parse_bracketed("(S (A a)) junk"), TreebankError);
  CHECK_THROWS_AS(parse_bracketed("S (A a)"), TreebankError);
}

TEST_CASE("strip_punctuation deletes leaves and remaps spans") {
  const GoldTree t = parse_bracketed("(S (NP (DT the) (NN dog)) (. .))");
  const auto stripped = strip_punctuation(t, punct_set());
  REQUIRE(stripped.has_value());
  CHECK(stripped->tokens == std::vector<std::string>{"the", "dog"});
  CHECK(stripped->spans == spans_of({{0, 2, "S"}, {0, 2, "NP"}}));
}

TEST_CASE("strip_punctuation leaves clean trees unchanged") {
  const GoldTree t = parse_bracketed("(S (NP (DT the) (NN dog)) (VP (VBZ barks)))");
  const auto stripped = strip_punctuation(t, punct_set());
  REQUIRE(stripped.has_value());
  CHECK(stripped->tokens == t.tokens);
  CHECK(stripped->spans == t.spans);
}

TEST_CASE("strip_punctuation signals an all-punctuation sentence") {
  const GoldTree t = parse_bracketed("(S (. .) (. !))");
  CHECK_FALSE(strip_punctuation(t, punct_set()).has_value());
}

TEST_CASE("strip_punctuation keeps token arithmetic consistent") {
  const GoldTree t = parse_bracketed(
      "(S (NP (DT the) (, ,) (NN dog) (, ,)) (VP (VBZ barks) (. .)))");
  std::size_t punct_leaves = 0;
  for (const auto& tag : t.pos_tags) punct_leaves += punct_set().count(tag);
  const auto stripped = strip_punctuation(t, punct_set());
  REQUIRE(stripped.has_value());
  CHECK(stripped->tokens.size() == t.tokens.size() - punct_leaves);
  CHECK(stripped->spans_well_nested());
}

TEST_CASE("build_vocab ranks by frequency then lexicographically") {
  std::vector<GoldTree> train;
  train.push_back(parse_bracketed("(S (A a) (A a) (A a) (B b) (B b) (C c))"));
  const Vocab capped = build_vocab(train, 2);
  CHECK(capped.size() == 3);  // unk + a + b
  CHECK(capped.id_of("a") == 1);
  CHECK(capped.id_of("b") == 2);
  CHECK(capped.id_of("c") == Vocab::kUnkId);

  std::vector<GoldTree> tied;
  tied.push_back(parse_bracketed("(S (A b) (A a))"));
  const Vocab both = build_vocab(tied, 2);
  CHECK(both.id_of("a") == 1);  // tie broken lexicographically
  CHECK(both.id_of("b") == 2);

  const Vocab all = build_vocab(train, 100);
  CHECK(all.size() == 4);  // cap above distinct count keeps everything
  CHECK_THROWS_AS(build_vocab({}, 10), TreebankError);
}

TEST_CASE("make_splits drops by length in the right splits") {
  const auto sentence = [](int len) {
    std::string s = "(S";
    for (int i = 0; i < len; ++i) s += " (A w" + std::to_string(i) + ")";
    return parse_bracketed(s + ")");
  };
  TreebankSplits trees;
  trees.train = {sentence(5), sentence(25), sentence(45), sentence(1)};
  trees.valid = {sentence(45), sentence(1)};
  trees.test = {sentence(60)};
  const Vocab vocab = build_vocab(trees.train, 10000);
  const CorpusSplits splits = make_splits(trees, vocab, 40);
  REQUIRE(splits.train.sentences.size() == 2);
  CHECK(splits.train.sentences[0].length() == 5);
  CHECK(splits.train.sentences[1].length() == 25);
  CHECK(splits.valid.sentences.size() == 1);  // cap ignored, 1-token dropped
  CHECK(splits.valid.sentences[0].length() == 45);
  CHECK(splits.test.sentences.size() == 1);

  const CorpusSplits wide = make_splits(trees, vocab, 50);
  CHECK(wide.train.sentences.size() == 3);  // 45-token sentence kept at cap 50
}

TEST_CASE("span extraction round-trips through bracket_string") {
  const std::vector<std::string> lines = {
      "(S (NP (DT the) (NN dog)) (VP (VBZ barks)))",
      "(X (A a))",
      "(TOP (S (NP (PRP it)) (VP (VBZ is) (ADJP (JJ fine)))))",
      "(S (A w0) (B w1) (C w2) (D w3))",
  };
  for (const auto& line : lines) {
    const GoldTree t = parse_bracketed(line);
    const std::string rebuilt = bracket_string(t.tokens, t.pos_tags, t.spans);
    const GoldTree back = parse_bracketed(rebuilt);
    CHECK(back.tokens == t.tokens);
    CHECK(back.spans == t.spans);
  }
}

TEST_CASE("bracket_string wraps span-free token lists into a parseable tree") {
  const std::string s = bracket_string({"a", "b"}, {"A", "B"}, {});
  const GoldTree t = parse_bracketed(s);
  CHECK(t.tokens == std::vector<std::string>{"a", "b"});
  CHECK(t.spans == spans_of({{0, 2, "TOP"}}));
}

TEST_CASE("corpus files round-trip through jsonl") {
  TreebankSplits trees;
  trees.train = {parse_bracketed("(S (NP (DT the) (NN dog)) (VP (VBZ barks)))"),
                 parse_bracketed("(S (A a) (B b))")};
  const Vocab vocab = build_vocab(trees.train, 10);
  const CorpusSplits splits = make_splits(trees, vocab, 40);

  const auto path = (std::filesystem::temp_directory_path() / "grind_corpus.jsonl").string();
  write_corpus_jsonl(path, splits.train);
  const Corpus back = read_corpus_jsonl(path, SplitTag::kTrain);
  REQUIRE(back.sentences.size() == splits.train.sentences.size());
  for (std::size_t i = 0; i < back.sentences.size(); ++i) {
    CHECK(back.sentences[i].ids == splits.train.sentences[i].ids);
    CHECK(back.sentences[i].tree.tokens == splits.train.sentences[i].tree.tokens);
    CHECK(back.sentences[i].tree.spans == splits.train.sentences[i].tree.spans);
  }
  std::filesystem::remove(path);
}

TEST_CASE("vocab files round-trip") {
  std::vector<GoldTree> train = {parse_bracketed("(S (A aa) (B bb) (A aa))")};
  const Vocab vocab = build_vocab(train, 10);
  const auto path = (std::filesystem::temp_directory_path() / "grind_vocab.json").string();
  write_vocab(path, vocab);
  const Vocab back = load_vocab(path);
  CHECK(back.id_to_token == vocab.id_to_token);
  CHECK(back.id_of("aa") == vocab.id_of("aa"));
  CHECK(back.id_of("zz") == Vocab::kUnkId);
  std::filesystem::remove(path);
}

TEST_CASE("random nested trees survive the span round trip") {
  Rng rng(71);
  for (int rep = 0; rep < 50; ++rep) {
    // Build a random binary bracketing with random labels over 2..12 tokens.
    const int n = 2 + static_cast<int>(rng.below(11));
    std::vector<std::string> tokens, tags;
    for (int i = 0; i < n; ++i) {
      tokens.push_back("w" + std::to_string(i));
      tags.push_back("T" + std::to_string(rng.below(3)));
    }
    std::vector<Span> spans;
    const auto build = [&](auto&& self, std::int32_t lo, std::int32_t hi) -> void {
      spans.push_back({lo, hi, "L" + std::to_string(rng.below(4))});
      if (hi - lo < 2) return;
      const auto split = lo + 1 + static_cast<std::int32_t>(rng.below(
                                      static_cast<std::uint64_t>(hi - lo - 1)));
      if (hi - lo >= 2 && split - lo >= 2) self(self, lo, split);
      if (hi - split >= 2) self(self, split, hi);
    };
    build(build, 0, n);
    GoldTree t;
    t.tokens = tokens;
    t.pos_tags = tags;
    t.spans = spans;
    t.normalize_spans();
    REQUIRE(t.spans_well_nested());
    const GoldTree back = parse_bracketed(bracket_string(t.tokens, t.pos_tags, t.spans));
    CHECK(back.spans == t.spans);
    CHECK(back.tokens == t.tokens);
  }
}

}  // TEST_SUITE
