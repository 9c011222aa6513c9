// Bracketed treebank ingestion: parsing, punctuation removal, vocabulary,
// and numericalized splits.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

namespace grind {

class TreebankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Span {
  std::int32_t start = 0;
  std::int32_t end = 0;  // exclusive
  std::string label;

  friend bool operator==(const Span& a, const Span& b) {
    return a.start == b.start && a.end == b.end && a.label == b.label;
  }
  // Outer-before-inner at the same start position, so sorted order matches
  // top-down bracketing order.
  friend bool operator<(const Span& a, const Span& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end > b.end;
    return a.label < b.label;
  }
};

struct GoldTree {
  std::vector<std::string> tokens;
  std::vector<std::string> pos_tags;
  std::vector<Span> spans;  // sorted, duplicate-free

  void normalize_spans();        // sort + dedupe
  bool spans_well_nested() const;
};

// Leaves are (TAG token) pairs; every node above the leaf layer contributes a
// span. Throws TreebankError with a character offset on malformed input.
GoldTree parse_bracketed(const std::string& line);

// Rebuilds a bracketed string whose reparse yields exactly the given spans.
// Sibling order follows span sorting; unary chains nest outer to inner.
std::string bracket_string(const std::vector<std::string>& tokens,
                           const std::vector<std::string>& pos_tags,
                           std::vector<Span> spans);

extern const std::vector<std::string> kDefaultPunctTags;

// Empty optional signals a sentence that was nothing but punctuation.
std::optional<GoldTree> strip_punctuation(
    const GoldTree& tree, const std::unordered_set<std::string>& punct_tags);

struct Vocab {
  std::vector<std::string> id_to_token;  // index 0 is the unk token
  std::unordered_map<std::string, std::int32_t> token_to_id;

  static constexpr std::int32_t kUnkId = 0;
  static constexpr const char* kUnkToken = "<unk>";

  std::int32_t id_of(const std::string& token) const {
    const auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnkId : it->second;
  }
  std::int64_t size() const { return static_cast<std::int64_t>(id_to_token.size()); }

  nlohmann::json to_json() const;
  static Vocab from_json(const nlohmann::json& j);
};

// Keeps the `cap` most frequent tokens (ties broken lexicographically); id 0
// is reserved for unk, kept tokens get ids 1.. in rank order.
Vocab build_vocab(const std::vector<GoldTree>& train, std::size_t cap = 10000);

enum class SplitTag { kTrain, kValid, kTest };
const char* split_name(SplitTag tag);

struct Sentence {
  std::vector<std::int32_t> ids;
  GoldTree tree;
  std::int64_t length() const { return static_cast<std::int64_t>(ids.size()); }
};

struct Corpus {
  SplitTag split = SplitTag::kTrain;
  std::vector<Sentence> sentences;
};

struct TreebankSplits {
  std::vector<GoldTree> train, valid, test;
};

struct CorpusSplits {
  Corpus train, valid, test;
};

// Sentences shorter than 2 tokens are dropped from every split; the length
// cap applies to train only (valid and test keep full-length sentences).
CorpusSplits make_splits(const TreebankSplits& trees, const Vocab& vocab,
                         std::int64_t max_train_len);

std::vector<GoldTree> load_bracketed_file(const std::string& path);

void write_corpus_jsonl(const std::string& path, const Corpus& corpus);
Corpus read_corpus_jsonl(const std::string& path, SplitTag tag);

void write_vocab(const std::string& path, const Vocab& vocab);
Vocab load_vocab(const std::string& path);

}  // namespace grind
