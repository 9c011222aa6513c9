// Synthetic treebank generator: draws a random PCFG in the start /
// nonterminal / preterminal form (peaky Dirichlet rows, with extra mass on
// pairs that contain preterminals so derivations terminate), then samples
// sentences with their gold trees by exact rejection on sentence length.
//
// Productivity is checked in closed form: a length dynamic program gives the
// exact probability that a derivation yields 2..max_length tokens. Draws
// whose acceptance probability is too small are resampled with a diagnostic.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "grind/config.hpp"
#include "grind/rng.hpp"
#include "grind/tensor.hpp"
#include "grind/treebank.hpp"

namespace grind {

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynthGrammar {
  SynthConfig config;
  // Probabilities (not logs); rows sum to 1. Composite pair indexing matches
  // the chart module: ids below N are nonterminals, the rest preterminals.
  Tensor start;        // (N)
  Tensor nonterminal;  // (N, (N+P)^2)
  Tensor preterminal;  // (P, V)

  // Exact P(len = k | accepted), k in [0, max_length]; entries 0 and 1 are 0.
  std::vector<double> length_dist;
  double acceptance = 0.0;  // exact P(2 <= len <= max_length) before rejection
  int draws_used = 1;       // 1 when the first grammar draw was productive
  std::string diagnostic;   // non-empty when earlier draws were discarded

  std::string nonterminal_label(std::int64_t a) const { return "A" + std::to_string(a); }
  std::string preterminal_label(std::int64_t t) const { return "T" + std::to_string(t); }
  std::string word(std::int64_t v) const { return "w" + std::to_string(v); }
};

// Minimum exact acceptance probability before a draw counts as unproductive.
inline constexpr double kMinAcceptance = 0.05;
inline constexpr int kMaxGrammarDraws = 50;

// Draws Dirichlet rule tables until one passes the productivity check;
// throws SynthError after kMaxGrammarDraws failures.
SynthGrammar sample_synth_grammar(const SynthConfig& config, Rng& rng);

// One gold tree with 2..max_length tokens; rejection is exact (a partial
// derivation aborts as soon as its token lower bound exceeds the cap).
GoldTree sample_tree(const SynthGrammar& grammar, Rng& rng);

// Train/valid/test splits sized by the config, in that sampling order.
TreebankSplits sample_corpus(const SynthGrammar& grammar, Rng& rng);

}  // namespace grind
