// Inside algorithm, Viterbi decoding, and a brute-force enumeration oracle.
//
// Charts are kept in log space throughout. Width-1 cells live on preterminals
// and wider cells on nonterminals, so each split k of a span picks one of
// four (left-type, right-type) sub-blocks of the nonterminal rule table. The
// reduction order inside a cell is fixed: splits outermost (ascending), then
// the left child symbol, then the right child symbol. Batched and
// single-sentence paths share this order, which makes them bit-identical.

#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "grind/grammar.hpp"
#include "grind/treebank.hpp"

namespace grind {

class ChartError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rule tables for a single sentence, batch dimension squeezed away.
//   start: (|N|), nonterminal: (|N|, R*R) with pair (B,C) at B*R+C where
//   R = |N|+|P|, preterminal: (|P|, |V|).
struct RuleTables {
  Tensor start;
  Tensor nonterminal;
  Tensor preterminal;

  std::int64_t n_nonterminals() const { return start.shape()[0]; }
  std::int64_t n_preterminals() const { return preterminal.shape()[0]; }
  std::int64_t vocab_size() const { return preterminal.shape()[1]; }
  std::int64_t rhs_symbols() const { return n_nonterminals() + n_preterminals(); }
};

// Extracts sentence b from batched table values (batch-1 blocks serve any b).
RuleTables tables_from_batch(const RuleTableValues& values, std::int64_t b);

// Binary parse tree in preorder. Internal nodes carry a nonterminal id and
// the absolute split position; leaves carry a preterminal id and split -1.
struct ParseNode {
  std::int32_t start = 0;
  std::int32_t end = 0;
  std::int32_t split = -1;
  std::int32_t symbol = 0;
};

struct ParseTree {
  std::int32_t n = 0;
  std::vector<ParseNode> nodes;

  bool well_formed() const;
};

// Spans for every node; internal nodes are labeled NT<id>, leaves T<id>.
std::vector<Span> tree_spans(const ParseTree& tree);

// Bracketed string with X-labeled internal nodes and T<id> leaf tags.
std::string tree_bracket_string(const ParseTree& tree,
                                const std::vector<std::string>& tokens);

// Sum of the log-probabilities of every rule in the tree, including the
// start rule.
double tree_log_score(const ParseTree& tree, const std::vector<std::int32_t>& ids,
                      const RuleTables& tables);

// Differentiable batched inside pass. All sentences must share one length
// n >= 2; table nodes may have batch extent 1 (shared) or ids.size().
// Returns a (batch) node of per-sentence log partition values.
NodeId build_inside_logZ(Graph& g, const std::vector<std::vector<std::int32_t>>& ids,
                         const RuleTableNodes& tables);

// Single-sentence convenience wrapper around build_inside_logZ.
double inside_logZ(const std::vector<std::int32_t>& ids, const RuleTables& tables);

// Max-plus CYK. Ties break toward the smallest split, then the smallest
// left/right/root symbol ids, which the ascending scan order gives for free.
std::pair<ParseTree, double> viterbi_parse(const std::vector<std::int32_t>& ids,
                                           const RuleTables& tables);

// Every tree shape times every labeling, with exact scores. Guarded to
// n <= 8; meant for oracle tests only.
struct ScoredParse {
  ParseTree tree;
  double score = 0.0;
};
std::vector<ScoredParse> enumerate_parses(const std::vector<std::int32_t>& ids,
                                          const RuleTables& tables);

// Streaming form of the same enumeration: one callback per complete parse,
// nothing materialized. The tree reference points into a reused buffer and
// is only valid for the duration of the call.
void for_each_parse(const std::vector<std::int32_t>& ids, const RuleTables& tables,
                    const std::function<void(const ParseTree&, double)>& visit);

// Expected rule counts via the gradient of inside_logZ with respect to the
// log-probability tables. Shapes match the corresponding table blocks.
struct RuleCounts {
  Tensor start;        // (|N|)
  Tensor nonterminal;  // (|N|, R*R)
  Tensor preterminal;  // (|P|, |V|)
};
RuleCounts expected_rule_counts(const std::vector<std::int32_t>& ids,
                                const RuleTables& tables);

}  // namespace grind
