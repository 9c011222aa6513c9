#include "grind/chart.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace grind {

namespace {

void check_sentence(const std::vector<std::int32_t>& ids, std::int64_t vocab) {
  if (static_cast<std::int64_t>(ids.size()) < 2) {
    throw ChartError("sentences shorter than 2 tokens are unparseable");
  }
  for (const std::int32_t id : ids) {
    if (id < 0 || id >= vocab) {
      throw ChartError("token id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
  }
}

std::int64_t batch_extent(const Shape& s, std::int64_t batch, const char* what) {
  if (s.empty() || (s[0] != 1 && s[0] != batch)) {
    throw ChartError(std::string(what) + " batch extent " + shape_str(s) +
                     " incompatible with batch " + std::to_string(batch));
  }
  return s[0];
}

}  // namespace

RuleTables tables_from_batch(const RuleTableValues& values, std::int64_t b) {
  const auto pick = [&](const Tensor& t) {
    const std::int64_t row = t.shape()[0] == 1 ? 0 : b;
    Tensor picked = slice(t, 0, row, row + 1);
    Shape squeezed(picked.shape().begin() + 1, picked.shape().end());
    return reshape(picked, squeezed);
  };
  return {pick(values.start), pick(values.nonterminal), pick(values.preterminal)};
}

NodeId build_inside_logZ(Graph& g, const std::vector<std::vector<std::int32_t>>& ids,
                         const RuleTableNodes& tables) {
  const auto batch = static_cast<std::int64_t>(ids.size());
  if (batch == 0) throw ChartError("empty batch");
  const auto n = static_cast<std::int64_t>(ids[0].size());

  const Shape& ss = g.shape_of(tables.start);
  const Shape& ns = g.shape_of(tables.nonterminal);
  const Shape& ps = g.shape_of(tables.preterminal);
  if (ss.size() != 2 || ns.size() != 3 || ps.size() != 3) {
    throw ChartError("rule table nodes have unexpected ranks");
  }
  const std::int64_t nN = ss[1];
  const std::int64_t nP = ps[1];
  const std::int64_t vocab = ps[2];
  const std::int64_t rhs = nN + nP;
  if (ns[1] != nN || ns[2] != rhs * rhs) {
    throw ChartError("nonterminal block shape " + shape_str(ns) + " does not match |N|=" +
                     std::to_string(nN) + ", |P|=" + std::to_string(nP));
  }
  for (const auto& sent : ids) {
    if (static_cast<std::int64_t>(sent.size()) != n) {
      throw ChartError("batched sentences must share one length");
    }
    check_sentence(sent, vocab);
  }
  batch_extent(ss, batch, "start");
  const std::int64_t nt_bz = batch_extent(ns, batch, "nonterminal");
  const std::int64_t pt_bz = batch_extent(ps, batch, "preterminal");

  // Width-1 cells: beta[i,i+1,T] = preterminal[T, w_i], fetched by slicing.
  std::vector<NodeId> pt_rows(static_cast<std::size_t>(batch));
  for (std::int64_t b = 0; b < batch; ++b) {
    pt_rows[b] = pt_bz == 1 ? tables.preterminal : g.slice(tables.preterminal, 0, b, b + 1);
  }
  // cell[w][i] covers [i, i+w): (batch, |P|) at width 1, (batch, |N|) above.
  std::vector<std::vector<NodeId>> cell(static_cast<std::size_t>(n) + 1,
                                        std::vector<NodeId>(static_cast<std::size_t>(n), -1));
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<NodeId> rows;
    rows.reserve(static_cast<std::size_t>(batch));
    for (std::int64_t b = 0; b < batch; ++b) {
      const std::int32_t w = ids[b][i];
      rows.push_back(g.reshape(g.slice(pt_rows[b], 2, w, w + 1), {1, nP}));
    }
    cell[1][i] = rows.size() == 1 ? rows[0] : g.concat(rows, 0);
  }

  // The four (left-type, right-type) sub-blocks of the pair table, built on
  // demand. Type 0 selects nonterminal children, type 1 preterminal.
  const NodeId nt4 = g.reshape(tables.nonterminal, {nt_bz, nN, rhs, rhs});
  std::array<NodeId, 4> blocks{-1, -1, -1, -1};
  const auto type_range = [&](int type) {
    return type == 0 ? std::pair<std::int64_t, std::int64_t>{0, nN}
                     : std::pair<std::int64_t, std::int64_t>{nN, rhs};
  };
  const auto block = [&](int lt, int rt) {
    const int key = lt * 2 + rt;
    if (blocks[static_cast<std::size_t>(key)] < 0) {
      const auto [llo, lhi] = type_range(lt);
      const auto [rlo, rhi] = type_range(rt);
      const NodeId cut = g.slice(g.slice(nt4, 2, llo, lhi), 3, rlo, rhi);
      blocks[static_cast<std::size_t>(key)] =
          g.reshape(cut, {nt_bz, nN, (lhi - llo) * (rhi - rlo)});
    }
    return blocks[static_cast<std::size_t>(key)];
  };

  for (std::int64_t w = 2; w <= n; ++w) {
    for (std::int64_t i = 0; i + w <= n; ++i) {
      std::vector<NodeId> per_split;
      per_split.reserve(static_cast<std::size_t>(w - 1));
      for (std::int64_t k = 1; k < w; ++k) {
        const int lt = k == 1 ? 1 : 0;
        const int rt = w - k == 1 ? 1 : 0;
        const std::int64_t lc = lt ? nP : nN;
        const std::int64_t rc = rt ? nP : nN;
        const NodeId left = g.reshape(cell[k][i], {batch, lc, 1});
        const NodeId right = g.reshape(cell[w - k][i + k], {batch, 1, rc});
        const NodeId pairs = g.reshape(g.add(left, right), {batch, 1, lc * rc});
        per_split.push_back(g.logsumexp(g.add(block(lt, rt), pairs), 2));
      }
      if (per_split.size() == 1) {
        cell[w][i] = per_split[0];
      } else {
        std::vector<NodeId> stacked;
        stacked.reserve(per_split.size());
        for (const NodeId s : per_split) stacked.push_back(g.reshape(s, {batch, 1, nN}));
        cell[w][i] = g.logsumexp(g.concat(stacked, 1), 1);
      }
    }
  }
  return g.logsumexp(g.add(tables.start, cell[n][0]), 1);
}

namespace {

struct TableLeaves {
  NodeId start, nonterminal, preterminal;
};

TableLeaves bind_tables(Graph& g, const RuleTables& tables, bool trainable) {
  const std::int64_t nN = tables.n_nonterminals();
  const std::int64_t nP = tables.n_preterminals();
  const std::int64_t vocab = tables.vocab_size();
  const std::int64_t rhs = tables.rhs_symbols();
  if (tables.nonterminal.shape() != Shape{nN, rhs * rhs}) {
    throw ChartError("nonterminal table must be (|N|, R*R), got " +
                     shape_str(tables.nonterminal.shape()));
  }
  return {g.leaf(reshape(tables.start, {1, nN}), trainable, "table.start"),
          g.leaf(reshape(tables.nonterminal, {1, nN, rhs * rhs}), trainable, "table.nonterminal"),
          g.leaf(reshape(tables.preterminal, {1, nP, vocab}), trainable, "table.preterminal")};
}

}  // namespace

double inside_logZ(const std::vector<std::int32_t>& ids, const RuleTables& tables) {
  Graph g;
  const TableLeaves leaves = bind_tables(g, tables, false);
  const NodeId logZ =
      build_inside_logZ(g, {ids}, {leaves.start, leaves.nonterminal, leaves.preterminal});
  g.forward();
  return g.value(logZ)[0];
}

RuleCounts expected_rule_counts(const std::vector<std::int32_t>& ids,
                                const RuleTables& tables) {
  Graph g;
  const TableLeaves leaves = bind_tables(g, tables, true);
  const NodeId logZ =
      build_inside_logZ(g, {ids}, {leaves.start, leaves.nonterminal, leaves.preterminal});
  g.forward();
  g.backward(logZ);
  RuleCounts counts;
  counts.start = reshape(g.grad(leaves.start), tables.start.shape());
  counts.nonterminal = reshape(g.grad(leaves.nonterminal), tables.nonterminal.shape());
  counts.preterminal = reshape(g.grad(leaves.preterminal), tables.preterminal.shape());
  return counts;
}

bool ParseTree::well_formed() const {
  if (nodes.empty()) return false;
  std::size_t idx = 0;
  const auto walk = [&](auto&& self, std::int32_t lo, std::int32_t hi) -> bool {
    if (idx >= nodes.size()) return false;
    const ParseNode& nd = nodes[idx++];
    if (nd.start != lo || nd.end != hi || lo >= hi) return false;
    if (nd.split < 0) return hi - lo == 1;
    if (nd.split <= lo || nd.split >= hi) return false;
    return self(self, lo, nd.split) && self(self, nd.split, hi);
  };
  const bool ok = walk(walk, 0, n);
  return ok && idx == nodes.size();
}

std::vector<Span> tree_spans(const ParseTree& tree) {
  std::vector<Span> spans;
  spans.reserve(tree.nodes.size());
  for (const ParseNode& nd : tree.nodes) {
    const std::string label =
        (nd.split < 0 ? "T" : "NT") + std::to_string(nd.symbol);
    spans.push_back({nd.start, nd.end, label});
  }
  std::sort(spans.begin(), spans.end());
  spans.erase(std::unique(spans.begin(), spans.end()), spans.end());
  return spans;
}

std::string tree_bracket_string(const ParseTree& tree,
                                const std::vector<std::string>& tokens) {
  std::vector<std::string> tags(tokens.size(), "T");
  std::vector<Span> spans;
  for (const ParseNode& nd : tree.nodes) {
    if (nd.split < 0) {
      tags[static_cast<std::size_t>(nd.start)] = "T" + std::to_string(nd.symbol);
    } else {
      spans.push_back({nd.start, nd.end, "X"});
    }
  }
  return bracket_string(tokens, tags, std::move(spans));
}

double tree_log_score(const ParseTree& tree, const std::vector<std::int32_t>& ids,
                      const RuleTables& tables) {
  const std::int64_t rhs = tables.rhs_symbols();
  const std::int64_t nN = tables.n_nonterminals();
  std::size_t idx = 0;
  const auto composite = [&](const ParseNode& nd) {
    return nd.split < 0 ? nN + nd.symbol : nd.symbol;
  };
  const auto walk = [&](auto&& self) -> double {
    const ParseNode& nd = tree.nodes[idx++];
    if (nd.split < 0) {
      return tables.preterminal.at({nd.symbol, ids[static_cast<std::size_t>(nd.start)]});
    }
    const std::size_t left_at = idx;
    const double left = self(self);
    const std::size_t right_at = idx;
    const double right = self(self);
    const std::int64_t pair =
        composite(tree.nodes[left_at]) * rhs + composite(tree.nodes[right_at]);
    return tables.nonterminal.at({nd.symbol, pair}) + left + right;
  };
  const double body = walk(walk);
  return tables.start[tree.nodes[0].symbol] + body;
}

std::pair<ParseTree, double> viterbi_parse(const std::vector<std::int32_t>& ids,
                                           const RuleTables& tables) {
  const auto n = static_cast<std::int64_t>(ids.size());
  check_sentence(ids, tables.vocab_size());
  const std::int64_t nN = tables.n_nonterminals();
  const std::int64_t nP = tables.n_preterminals();
  const std::int64_t rhs = nN + nP;
  const double* nt = tables.nonterminal.data();

  // best[w][i][A] over nonterminals for width >= 2; leaf scores separately.
  std::vector<std::vector<double>> leaf(static_cast<std::size_t>(n),
                                        std::vector<double>(static_cast<std::size_t>(nP)));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t t = 0; t < nP; ++t) leaf[i][t] = tables.preterminal.at({t, ids[i]});
  }
  struct Back {
    std::int32_t k = 0, left = 0, right = 0;  // split offset and composite ids
  };
  const auto flat = [n](std::int64_t w, std::int64_t i) {
    return static_cast<std::size_t>(w * n + i);
  };
  std::vector<std::vector<double>> best(static_cast<std::size_t>((n + 1) * n));
  std::vector<std::vector<Back>> back(static_cast<std::size_t>((n + 1) * n));

  for (std::int64_t w = 2; w <= n; ++w) {
    for (std::int64_t i = 0; i + w <= n; ++i) {
      std::vector<double> scores(static_cast<std::size_t>(nN), kNegInf);
      std::vector<Back> choice(static_cast<std::size_t>(nN));
      for (std::int64_t k = 1; k < w; ++k) {
        const bool lp = k == 1;
        const bool rp = w - k == 1;
        const std::vector<double>& ls = lp ? leaf[i] : best[flat(k, i)];
        const std::vector<double>& rs = rp ? leaf[i + k] : best[flat(w - k, i + k)];
        const std::int64_t loff = lp ? nN : 0;
        const std::int64_t roff = rp ? nN : 0;
        for (std::int64_t a = 0; a < nN; ++a) {
          const double* row = nt + a * rhs * rhs;
          double& cur = scores[static_cast<std::size_t>(a)];
          for (std::int64_t x = 0; x < static_cast<std::int64_t>(ls.size()); ++x) {
            const double lx = ls[static_cast<std::size_t>(x)];
            const double* pair_row = row + (x + loff) * rhs + roff;
            for (std::int64_t y = 0; y < static_cast<std::int64_t>(rs.size()); ++y) {
              const double cand = pair_row[y] + lx + rs[static_cast<std::size_t>(y)];
              if (cand > cur) {
                cur = cand;
                choice[static_cast<std::size_t>(a)] = {
                    static_cast<std::int32_t>(k), static_cast<std::int32_t>(x + loff),
                    static_cast<std::int32_t>(y + roff)};
              }
            }
          }
        }
      }
      best[flat(w, i)] = std::move(scores);
      back[flat(w, i)] = std::move(choice);
    }
  }

  std::int64_t root = 0;
  double root_score = kNegInf;
  for (std::int64_t a = 0; a < nN; ++a) {
    const double cand = tables.start[a] + best[flat(n, 0)][static_cast<std::size_t>(a)];
    if (cand > root_score) {
      root_score = cand;
      root = a;
    }
  }

  ParseTree tree;
  tree.n = static_cast<std::int32_t>(n);
  const auto rebuild = [&](auto&& self, std::int64_t lo, std::int64_t hi,
                           std::int64_t sym) -> void {
    if (hi - lo == 1) {
      tree.nodes.push_back({static_cast<std::int32_t>(lo), static_cast<std::int32_t>(hi), -1,
                            static_cast<std::int32_t>(sym - nN)});
      return;
    }
    const Back& b = back[flat(hi - lo, lo)][static_cast<std::size_t>(sym)];
    tree.nodes.push_back({static_cast<std::int32_t>(lo), static_cast<std::int32_t>(hi),
                          static_cast<std::int32_t>(lo + b.k),
                          static_cast<std::int32_t>(sym)});
    self(self, lo, lo + b.k, b.left);
    self(self, lo + b.k, hi, b.right);
  };
  rebuild(rebuild, 0, n, root);
  return {std::move(tree), root_score};
}

void for_each_parse(const std::vector<std::int32_t>& ids, const RuleTables& tables,
                    const std::function<void(const ParseTree&, double)>& visit) {
  const auto n = static_cast<std::int64_t>(ids.size());
  check_sentence(ids, tables.vocab_size());
  if (n < 2) throw ChartError("enumeration needs at least 2 tokens");
  if (n > 8) {
    throw ChartError("enumeration is limited to 8 tokens (Catalan blow-up)");
  }
  const std::int64_t nN = tables.n_nonterminals();
  const std::int64_t nP = tables.n_preterminals();
  const std::int64_t rhs = nN + nP;

  // Backtracking over (shape, labeling) jointly: the preorder node buffer is
  // extended on the way down and truncated on the way back up, so nothing is
  // memoized and memory stays linear in n. `done(sym, score)` fires once per
  // complete subtree of [i, j) with the buffer holding exactly that subtree.
  ParseTree scratch;
  scratch.n = static_cast<std::int32_t>(n);
  using Cont = std::function<void(std::int64_t, double)>;
  const std::function<void(std::int64_t, std::int64_t, const Cont&)> gen =
      [&](std::int64_t i, std::int64_t j, const Cont& done) {
        if (j - i == 1) {
          scratch.nodes.push_back({static_cast<std::int32_t>(i), static_cast<std::int32_t>(j),
                                   -1, 0});
          for (std::int64_t t = 0; t < nP; ++t) {
            scratch.nodes.back().symbol = static_cast<std::int32_t>(t);
            done(t, tables.preterminal.at({t, ids[static_cast<std::size_t>(i)]}));
          }
          scratch.nodes.pop_back();
          return;
        }
        for (std::int64_t k = i + 1; k < j; ++k) {
          const std::int64_t loff = k - i == 1 ? nN : 0;
          const std::int64_t roff = j - k == 1 ? nN : 0;
          const std::size_t here = scratch.nodes.size();
          scratch.nodes.push_back({static_cast<std::int32_t>(i), static_cast<std::int32_t>(j),
                                   static_cast<std::int32_t>(k), 0});
          gen(i, k, [&](std::int64_t x, double lscore) {
            gen(k, j, [&](std::int64_t y, double rscore) {
              const std::int64_t pair = (x + loff) * rhs + (y + roff);
              for (std::int64_t a = 0; a < nN; ++a) {
                scratch.nodes[here].symbol = static_cast<std::int32_t>(a);
                done(a, tables.nonterminal.at({a, pair}) + lscore + rscore);
              }
            });
          });
          scratch.nodes.pop_back();
        }
      };

  gen(0, n, [&](std::int64_t a, double score) { visit(scratch, tables.start[a] + score); });
}

std::vector<ScoredParse> enumerate_parses(const std::vector<std::int32_t>& ids,
                                          const RuleTables& tables) {
  std::vector<ScoredParse> out;
  for_each_parse(ids, tables, [&](const ParseTree& tree, double score) {
    out.push_back({tree, score});
  });
  return out;
}

}  // namespace grind
