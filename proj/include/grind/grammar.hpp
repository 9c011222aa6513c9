// Symbol inventory and rule-probability tables.
//
// The grammar has the restricted binary form
//   S -> A          (A a nonterminal)
//   A -> B C        (B, C nonterminals or preterminals)
//   T -> w          (T a preterminal, w a word)
// Right-hand-side symbols use a composite index in [0, |N|+|P|): ids below
// |N| are nonterminals, the rest are preterminals shifted by |N|. A pair
// (B, C) is flattened as B * (|N|+|P|) + C.
//
// Each rule block comes from a two-hidden-layer ReLU network applied to the
// left-hand symbol's embedding, concatenated with the sentence vector z
// unless the block's sharing flag removes z from its input entirely. A final
// log-softmax over the expansion axis normalizes the block, so every table
// satisfies logsumexp == 0 per left-hand side by construction.

#pragma once

#include <optional>

#include "grind/netops.hpp"

namespace grind {

struct GrammarConfig {
  std::int64_t n_nonterminals = 30;
  std::int64_t n_preterminals = 60;
  std::int64_t vocab_size = 0;
  std::int64_t sym_dim = 256;
  std::int64_t hidden_dim = 256;
  std::int64_t z_dim = 64;
  bool share_start = false;
  bool share_nonterminal = false;
  bool share_preterminal = false;

  std::int64_t rhs_symbols() const { return n_nonterminals + n_preterminals; }
  std::int64_t pair_count() const { return rhs_symbols() * rhs_symbols(); }
  bool all_shared() const { return share_start && share_nonterminal && share_preterminal; }
  bool uses_z() const { return !all_shared(); }

  void validate() const;
};

// True iff rule tables cannot depend on z, i.e. the model is an N-PCFG.
inline bool degenerate_check(const GrammarConfig& config) { return config.all_shared(); }

// Rule tables as graph nodes. Blocks built without z have batch extent 1 and
// broadcast against any batch; z-dependent blocks carry the z batch extent.
//   start:       (batch, |N|)
//   nonterminal: (batch, |N|, (|N|+|P|)^2)
//   preterminal: (batch, |P|, |V|)
struct RuleTableNodes {
  NodeId start = -1;
  NodeId nonterminal = -1;
  NodeId preterminal = -1;
};

// Writes freshly initialized grammar parameters into the store under
// "grammar." names.
void init_grammar(ArrayStore& store, const GrammarConfig& config, Rng& rng);

// Builds the three normalized blocks. `z` must be a rank-2 (batch, z_dim)
// node and is required when any sharing flag is false; a z passed to a fully
// shared grammar is ignored.
RuleTableNodes build_rule_table(Graph& g, const ArrayStore& store, ParamBinding& binding,
                                const GrammarConfig& config, std::optional<NodeId> z);

// Convenience evaluation without keeping the graph around. `z` may be rank 1
// (one sentence) or rank 2 (a batch).
struct RuleTableValues {
  Tensor start, nonterminal, preterminal;
};
RuleTableValues rule_table(const ArrayStore& store, const GrammarConfig& config,
                           const std::optional<Tensor>& z);

}  // namespace grind
