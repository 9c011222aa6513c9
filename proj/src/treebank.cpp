#include "grind/treebank.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "grind/serialize.hpp"

namespace grind {

void GoldTree::normalize_spans() {
  std::sort(spans.begin(), spans.end());
  spans.erase(std::unique(spans.begin(), spans.end()), spans.end());
}

bool GoldTree::spans_well_nested() const {
  const auto n = static_cast<std::int32_t>(tokens.size());
  for (const Span& s : spans) {
    if (s.start < 0 || s.start >= s.end || s.end > n) return false;
  }
  for (std::size_t i = 0; i < spans.size(); ++i) {
    for (std::size_t j = i + 1; j < spans.size(); ++j) {
      const Span& a = spans[i];
      const Span& b = spans[j];
      const bool disjoint = a.end <= b.start || b.end <= a.start;
      const bool nested = (a.start <= b.start && b.end <= a.end) ||
                          (b.start <= a.start && a.end <= b.end);
      if (!disjoint && !nested) return false;
    }
  }
  return true;
}

namespace {

struct Parser {
  const std::string& text;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw TreebankError("parse error at offset " + std::to_string(pos) + ": " + what);
  }
  void skip_space() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool at_end() {
    skip_space();
    return pos >= text.size();
  }
  char peek() {
    skip_space();
    if (pos >= text.size()) fail("unexpected end of input");
    return text[pos];
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos;
  }
  std::string atom() {
    skip_space();
    const std::size_t begin = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
           text[pos] != '(' && text[pos] != ')') {
      ++pos;
    }
    if (pos == begin) fail("expected a symbol");
    return text.substr(begin, pos - begin);
  }

  // Returns the covered token range [first, tokens.size()).
  void node(GoldTree& tree) {
    expect('(');
    const std::string label = atom();
    const auto first = static_cast<std::int32_t>(tree.tokens.size());
    if (peek() == '(') {
      while (peek() == '(') node(tree);
      expect(')');
      const auto last = static_cast<std::int32_t>(tree.tokens.size());
      tree.spans.push_back({first, last, label});
    } else {
      // (TAG token) leaf pair: the tag names the token's part of speech and
      // does not contribute a span.
      const std::string token = atom();
      expect(')');
      tree.tokens.push_back(token);
      tree.pos_tags.push_back(label);
    }
  }
};

}  // namespace

GoldTree parse_bracketed(const std::string& line) {
  Parser p{line};
  if (p.at_end()) p.fail("empty input");
  GoldTree tree;
  p.node(tree);
  if (!p.at_end()) p.fail("trailing input after tree");
  tree.normalize_spans();
  return tree;
}

namespace {

struct Renderer {
  const std::vector<std::string>& tokens;
  const std::vector<std::string>& pos_tags;
  const std::vector<Span>& spans;
  std::size_t k = 0;  // cursor into the pre-order span list

  std::string leaf(std::int32_t i) const {
    const std::string tag =
        i < static_cast<std::int32_t>(pos_tags.size()) ? pos_tags[i] : "X";
    return "(" + tag + " " + tokens[i] + ")";
  }

  std::string children(std::int32_t lo, std::int32_t hi) {
    std::string out;
    std::int32_t i = lo;
    while (i < hi) {
      if (!out.empty()) out += ' ';
      if (k < spans.size() && spans[k].start == i && spans[k].end <= hi) {
        const Span s = spans[k++];
        out += "(" + s.label + " " + children(s.start, s.end) + ")";
        i = s.end;
      } else {
        out += leaf(i);
        ++i;
      }
    }
    return out;
  }
};

}  // namespace

std::string bracket_string(const std::vector<std::string>& tokens,
                           const std::vector<std::string>& pos_tags,
                           std::vector<Span> spans) {
  std::sort(spans.begin(), spans.end());
  spans.erase(std::unique(spans.begin(), spans.end()), spans.end());
  const auto n = static_cast<std::int32_t>(tokens.size());
  Renderer r{tokens, pos_tags, spans};
  const bool rooted = !spans.empty() && spans[0].start == 0 && spans[0].end == n;
  const std::string body = r.children(0, n);
  // A sentence without a covering span renders as a forest; wrap it so the
  // output reparses as a single tree.
  return rooted ? body : "(TOP " + body + ")";
}

const std::vector<std::string> kDefaultPunctTags = {
    ".", ",", ":", "``", "''", "-LRB-", "-RRB-", "#", "$", "PUNC", "PU"};

std::optional<GoldTree> strip_punctuation(
    const GoldTree& tree, const std::unordered_set<std::string>& punct_tags) {
  const auto n = static_cast<std::int32_t>(tree.tokens.size());
  std::vector<std::int32_t> kept_before(static_cast<std::size_t>(n) + 1, 0);
  GoldTree out;
  for (std::int32_t i = 0; i < n; ++i) {
    const bool keep = punct_tags.find(tree.pos_tags[i]) == punct_tags.end();
    kept_before[i + 1] = kept_before[i] + (keep ? 1 : 0);
    if (keep) {
      out.tokens.push_back(tree.tokens[i]);
      out.pos_tags.push_back(tree.pos_tags[i]);
    }
  }
  if (out.tokens.empty()) return std::nullopt;
  for (const Span& s : tree.spans) {
    const std::int32_t start = kept_before[s.start];
    const std::int32_t end = kept_before[s.end];
    if (start < end) out.spans.push_back({start, end, s.label});
  }
  out.normalize_spans();
  return out;
}

nlohmann::json Vocab::to_json() const {
  nlohmann::json j;
  j["unk_id"] = kUnkId;
  j["tokens"] = id_to_token;
  return j;
}

Vocab Vocab::from_json(const nlohmann::json& j) {
  Vocab v;
  v.id_to_token = j.at("tokens").get<std::vector<std::string>>();
  if (v.id_to_token.empty() || v.id_to_token[0] != kUnkToken) {
    throw TreebankError("vocab file does not reserve id 0 for " + std::string(kUnkToken));
  }
  for (std::size_t i = 1; i < v.id_to_token.size(); ++i) {
    v.token_to_id[v.id_to_token[i]] = static_cast<std::int32_t>(i);
  }
  return v;
}

Vocab build_vocab(const std::vector<GoldTree>& train, std::size_t cap) {
  if (train.empty()) throw TreebankError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::int64_t> counts;
  for (const GoldTree& tree : train) {
    for (const std::string& token : tree.tokens) ++counts[token];
  }
  std::vector<std::pair<std::string, std::int64_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > cap) ranked.resize(cap);

  Vocab v;
  v.id_to_token.push_back(Vocab::kUnkToken);
  for (const auto& [token, count] : ranked) {
    v.token_to_id[token] = static_cast<std::int32_t>(v.id_to_token.size());
    v.id_to_token.push_back(token);
  }
  return v;
}

const char* split_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain: return "train";
    case SplitTag::kValid: return "valid";
    case SplitTag::kTest: return "test";
  }
  return "?";
}

namespace {

Corpus make_split(const std::vector<GoldTree>& trees, const Vocab& vocab, SplitTag tag,
                  std::int64_t max_train_len) {
  Corpus corpus;
  corpus.split = tag;
  for (const GoldTree& tree : trees) {
    const auto len = static_cast<std::int64_t>(tree.tokens.size());
    if (len < 2) continue;
    if (tag == SplitTag::kTrain && len > max_train_len) continue;
    Sentence s;
    s.ids.reserve(tree.tokens.size());
    for (const std::string& token : tree.tokens) s.ids.push_back(vocab.id_of(token));
    s.tree = tree;
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace

CorpusSplits make_splits(const TreebankSplits& trees, const Vocab& vocab,
                         std::int64_t max_train_len) {
  CorpusSplits out;
  out.train = make_split(trees.train, vocab, SplitTag::kTrain, max_train_len);
  out.valid = make_split(trees.valid, vocab, SplitTag::kValid, max_train_len);
  out.test = make_split(trees.test, vocab, SplitTag::kTest, max_train_len);
  return out;
}

std::vector<GoldTree> load_bracketed_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TreebankError("cannot open " + path);
  std::vector<GoldTree> trees;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      trees.push_back(parse_bracketed(line));
    } catch (const TreebankError& e) {
      throw TreebankError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return trees;
}

void write_corpus_jsonl(const std::string& path, const Corpus& corpus) {
  std::string out;
  for (const Sentence& s : corpus.sentences) {
    nlohmann::json j;
    j["tokens"] = s.tree.tokens;
    j["ids"] = s.ids;
    nlohmann::json spans = nlohmann::json::array();
    for (const Span& sp : s.tree.spans) {
      spans.push_back(nlohmann::json::array({sp.start, sp.end, sp.label}));
    }
    j["spans"] = std::move(spans);
    out += j.dump();
    out += '\n';
  }
  atomic_write_file(path, out);
}

Corpus read_corpus_jsonl(const std::string& path, SplitTag tag) {
  std::ifstream in(path);
  if (!in) throw TreebankError("cannot open " + path);
  Corpus corpus;
  corpus.split = tag;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw TreebankError(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    Sentence s;
    s.ids = j.at("ids").get<std::vector<std::int32_t>>();
    s.tree.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& sp : j.at("spans")) {
      s.tree.spans.push_back({sp.at(0).get<std::int32_t>(), sp.at(1).get<std::int32_t>(),
                              sp.at(2).get<std::string>()});
    }
    s.tree.normalize_spans();
    if (s.ids.size() != s.tree.tokens.size()) {
      throw TreebankError(path + ":" + std::to_string(lineno) + ": ids/tokens length mismatch");
    }
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

void write_vocab(const std::string& path, const Vocab& vocab) {
  write_json_file(path, vocab.to_json());
}

Vocab load_vocab(const std::string& path) { return Vocab::from_json(parse_json_file(path)); }

}  // namespace grind
