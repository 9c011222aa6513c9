#include "grind/synth.hpp"

#include <cmath>

namespace grind {

namespace {

// Exact P(len = k) for k in [0, max], by symbol then from the start row.
// Lengths strictly decrease along the recursion (both children of a pair
// yield at least one token), so filling k upward needs no fixpoint.
std::vector<double> root_length_probs(const SynthGrammar& g) {
  const std::int64_t nN = g.config.n_nonterminals;
  const std::int64_t nP = g.config.n_preterminals;
  const std::int64_t rhs = nN + nP;
  const std::int64_t max = g.config.max_length;

  // probs[sym][k]: nonterminals first, preterminals shifted by nN.
  std::vector<std::vector<double>> probs(static_cast<std::size_t>(rhs),
                                         std::vector<double>(static_cast<std::size_t>(max) + 1));
  for (std::int64_t t = 0; t < nP; ++t) {
    if (max >= 1) probs[static_cast<std::size_t>(nN + t)][1] = 1.0;
  }
  for (std::int64_t k = 2; k <= max; ++k) {
    for (std::int64_t a = 0; a < nN; ++a) {
      double total = 0.0;
      for (std::int64_t x = 0; x < rhs; ++x) {
        for (std::int64_t y = 0; y < rhs; ++y) {
          const double rule = g.nonterminal.at({a, x * rhs + y});
          if (rule == 0.0) continue;
          double inner = 0.0;
          for (std::int64_t j = 1; j < k; ++j) {
            inner += probs[static_cast<std::size_t>(x)][static_cast<std::size_t>(j)] *
                     probs[static_cast<std::size_t>(y)][static_cast<std::size_t>(k - j)];
          }
          total += rule * inner;
        }
      }
      probs[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)] = total;
    }
  }
  std::vector<double> root(static_cast<std::size_t>(max) + 1, 0.0);
  for (std::int64_t k = 2; k <= max; ++k) {
    double total = 0.0;
    for (std::int64_t a = 0; a < nN; ++a) {
      total += g.start[a] * probs[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)];
    }
    root[static_cast<std::size_t>(k)] = total;
  }
  return root;
}

SynthGrammar draw_tables(const SynthConfig& config, Rng& rng) {
  const std::int64_t nN = config.n_nonterminals;
  const std::int64_t nP = config.n_preterminals;
  const std::int64_t rhs = nN + nP;

  SynthGrammar g;
  g.config = config;
  g.start = Tensor({nN});
  {
    const auto row = rng.dirichlet(static_cast<std::size_t>(nN), config.rule_concentration);
    for (std::int64_t a = 0; a < nN; ++a) g.start[a] = row[static_cast<std::size_t>(a)];
  }
  g.nonterminal = Tensor({nN, rhs * rhs});
  for (std::int64_t a = 0; a < nN; ++a) {
    auto row = rng.dirichlet(static_cast<std::size_t>(rhs * rhs), config.rule_concentration);
    // Scale each pair by bias^(number of preterminal children), then
    // renormalize: termination pressure without zeroing any rule.
    double total = 0.0;
    for (std::int64_t x = 0; x < rhs; ++x) {
      for (std::int64_t y = 0; y < rhs; ++y) {
        double w = row[static_cast<std::size_t>(x * rhs + y)];
        if (x >= nN) w *= config.termination_bias;
        if (y >= nN) w *= config.termination_bias;
        row[static_cast<std::size_t>(x * rhs + y)] = w;
        total += w;
      }
    }
    for (std::int64_t p = 0; p < rhs * rhs; ++p) {
      g.nonterminal[a * rhs * rhs + p] = row[static_cast<std::size_t>(p)] / total;
    }
  }
  g.preterminal = Tensor({nP, config.vocab_size});
  for (std::int64_t t = 0; t < nP; ++t) {
    const auto row =
        rng.dirichlet(static_cast<std::size_t>(config.vocab_size), config.rule_concentration);
    for (std::int64_t v = 0; v < config.vocab_size; ++v) {
      g.preterminal[t * config.vocab_size + v] = row[static_cast<std::size_t>(v)];
    }
  }
  return g;
}

}  // namespace

SynthGrammar sample_synth_grammar(const SynthConfig& config, Rng& rng) {
  config.validate();
  std::string diagnostic;
  for (int attempt = 1; attempt <= kMaxGrammarDraws; ++attempt) {
    SynthGrammar g = draw_tables(config, rng);
    const std::vector<double> root = root_length_probs(g);
    double acceptance = 0.0;
    for (double p : root) acceptance += p;
    if (acceptance >= kMinAcceptance) {
      g.acceptance = acceptance;
      g.length_dist.assign(root.size(), 0.0);
      for (std::size_t k = 0; k < root.size(); ++k) g.length_dist[k] = root[k] / acceptance;
      g.draws_used = attempt;
      g.diagnostic = diagnostic;
      return g;
    }
    diagnostic += "grammar draw " + std::to_string(attempt) +
                  " unproductive (acceptance " + std::to_string(acceptance) + "); resampled\n";
  }
  throw SynthError("no productive grammar in " + std::to_string(kMaxGrammarDraws) +
                   " draws:\n" + diagnostic);
}

namespace {

struct TreeSampler {
  const SynthGrammar& g;
  Rng& rng;
  std::int64_t nN, rhs, max;

  GoldTree tree;
  std::int64_t pending = 0;  // unexpanded symbols, each worth >= 1 token

  bool expand_nonterminal(std::int64_t a) {
    const std::int32_t begin = static_cast<std::int32_t>(tree.tokens.size());
    // One symbol becomes two: the token lower bound grows by one.
    pending += 1;
    if (static_cast<std::int64_t>(tree.tokens.size()) + pending > max) return false;

    std::vector<double> row(static_cast<std::size_t>(rhs * rhs));
    for (std::int64_t p = 0; p < rhs * rhs; ++p) {
      row[static_cast<std::size_t>(p)] = g.nonterminal[a * rhs * rhs + p];
    }
    const std::int64_t pair = static_cast<std::int64_t>(rng.categorical(row));
    const std::int64_t left = pair / rhs;
    const std::int64_t right = pair % rhs;
    if (!expand(left)) return false;
    if (!expand(right)) return false;
    tree.spans.push_back(
        {begin, static_cast<std::int32_t>(tree.tokens.size()), g.nonterminal_label(a)});
    return true;
  }

  void expand_preterminal(std::int64_t t) {
    std::vector<double> row(static_cast<std::size_t>(g.config.vocab_size));
    for (std::int64_t v = 0; v < g.config.vocab_size; ++v) {
      row[static_cast<std::size_t>(v)] = g.preterminal[t * g.config.vocab_size + v];
    }
    const auto v = static_cast<std::int64_t>(rng.categorical(row));
    tree.tokens.push_back(g.word(v));
    tree.pos_tags.push_back(g.preterminal_label(t));
    pending -= 1;
  }

  bool expand(std::int64_t sym) {
    if (sym < nN) return expand_nonterminal(sym);
    expand_preterminal(sym - nN);
    return true;
  }

  bool run() {
    pending = 1;
    std::vector<double> s(static_cast<std::size_t>(nN));
    for (std::int64_t a = 0; a < nN; ++a) s[static_cast<std::size_t>(a)] = g.start[a];
    const auto root = static_cast<std::int64_t>(rng.categorical(s));
    if (!expand_nonterminal(root)) return false;
    tree.normalize_spans();
    return true;
  }
};

}  // namespace

GoldTree sample_tree(const SynthGrammar& grammar, Rng& rng) {
  for (;;) {
    TreeSampler sampler{grammar, rng, grammar.config.n_nonterminals,
                        grammar.config.n_nonterminals + grammar.config.n_preterminals,
                        grammar.config.max_length, GoldTree{}, 0};
    if (sampler.run()) return std::move(sampler.tree);
  }
}

TreebankSplits sample_corpus(const SynthGrammar& grammar, Rng& rng) {
  TreebankSplits splits;
  splits.train.reserve(static_cast<std::size_t>(grammar.config.train_sentences));
  for (std::int64_t i = 0; i < grammar.config.train_sentences; ++i) {
    splits.train.push_back(sample_tree(grammar, rng));
  }
  splits.valid.reserve(static_cast<std::size_t>(grammar.config.val_sentences));
  for (std::int64_t i = 0; i < grammar.config.val_sentences; ++i) {
    splits.valid.push_back(sample_tree(grammar, rng));
  }
  splits.test.reserve(static_cast<std::size_t>(grammar.config.test_sentences));
  for (std::int64_t i = 0; i < grammar.config.test_sentences; ++i) {
    splits.test.push_back(sample_tree(grammar, rng));
  }
  return splits;
}

}  // namespace grind
