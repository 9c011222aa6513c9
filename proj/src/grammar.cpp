#include "grind/grammar.hpp"

namespace grind {

void GrammarConfig::validate() const {
  if (n_nonterminals < 1 || n_preterminals < 1 || vocab_size < 1) {
    throw GraphError("grammar needs at least one nonterminal, preterminal, and word");
  }
  if (sym_dim < 1 || hidden_dim < 1 || (uses_z() && z_dim < 1)) {
    throw GraphError("grammar dimensions must be positive");
  }
}

namespace {

struct BlockSpec {
  const char* name;
  std::int64_t lhs_count;  // rows fed through the network
  std::int64_t out_dim;    // expansion axis to normalize over
  bool shared;
};

std::vector<BlockSpec> block_specs(const GrammarConfig& c) {
  return {
      {"start", 1, c.n_nonterminals, c.share_start},
      {"nonterminal", c.n_nonterminals, c.pair_count(), c.share_nonterminal},
      {"preterminal", c.n_preterminals, c.vocab_size, c.share_preterminal},
  };
}

std::string pname(const BlockSpec& b, const char* suffix) {
  return std::string("grammar.") + b.name + "." + suffix;
}

}  // namespace

void init_grammar(ArrayStore& store, const GrammarConfig& config, Rng& rng) {
  config.validate();
  init_normal(store, "grammar.emb_start", {1, config.sym_dim}, 1.0, rng);
  init_normal(store, "grammar.emb_nonterminal", {config.n_nonterminals, config.sym_dim},
              1.0, rng);
  init_normal(store, "grammar.emb_preterminal", {config.n_preterminals, config.sym_dim},
              1.0, rng);
  for (const BlockSpec& b : block_specs(config)) {
    init_xavier(store, pname(b, "w_emb"), config.sym_dim, config.hidden_dim, rng);
    if (!b.shared) {
      init_xavier(store, pname(b, "w_z"), config.z_dim, config.hidden_dim, rng);
    }
    init_zeros(store, pname(b, "b1"), {config.hidden_dim});
    init_xavier(store, pname(b, "w2"), config.hidden_dim, config.hidden_dim, rng);
    init_zeros(store, pname(b, "b2"), {config.hidden_dim});
    init_xavier(store, pname(b, "w_out"), config.hidden_dim, b.out_dim, rng);
    init_zeros(store, pname(b, "b_out"), {b.out_dim});
  }
}

RuleTableNodes build_rule_table(Graph& g, const ArrayStore& store, ParamBinding& binding,
                                const GrammarConfig& config, std::optional<NodeId> z) {
  config.validate();
  if (config.uses_z()) {
    if (!z.has_value()) {
      throw GraphError("this grammar conditions on z, but no z was provided");
    }
    const Shape& zs = g.shape_of(*z);
    if (zs.size() != 2 || zs[1] != config.z_dim) {
      throw GraphError("z must have shape (batch, " + std::to_string(config.z_dim) +
                       "), got " + shape_str(zs));
    }
  }

  const NodeId emb_start = bind_param(g, store, binding, "grammar.emb_start");
  const NodeId emb_nt = bind_param(g, store, binding, "grammar.emb_nonterminal");
  const NodeId emb_pt = bind_param(g, store, binding, "grammar.emb_preterminal");
  const NodeId embs[3] = {emb_start, emb_nt, emb_pt};

  RuleTableNodes out;
  NodeId* slots[3] = {&out.start, &out.nonterminal, &out.preterminal};
  const auto specs = block_specs(config);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const BlockSpec& b = specs[i];
    const std::int64_t rows = b.lhs_count;
    const std::int64_t h = config.hidden_dim;

    // First layer: Linear(emb) broadcast-added with Linear(z), which equals a
    // single affine layer over the concatenation [emb, z].
    const NodeId w_emb = bind_param(g, store, binding, pname(b, "w_emb"));
    const NodeId b1 = bind_param(g, store, binding, pname(b, "b1"));
    NodeId pre = g.reshape(g.matmul(embs[i], w_emb), {1, rows, h});
    std::int64_t batch = 1;
    if (!b.shared) {
      const NodeId w_z = bind_param(g, store, binding, pname(b, "w_z"));
      batch = g.shape_of(*z)[0];
      const NodeId zt = g.reshape(g.matmul(*z, w_z), {batch, 1, h});
      pre = g.add(pre, zt);
    }
    const NodeId h1 = g.relu(g.add(pre, b1));

    const NodeId w2 = bind_param(g, store, binding, pname(b, "w2"));
    const NodeId b2 = bind_param(g, store, binding, pname(b, "b2"));
    const NodeId flat1 = g.reshape(h1, {batch * rows, h});
    const NodeId h2 = g.relu(affine(g, flat1, w2, b2));

    const NodeId w_out = bind_param(g, store, binding, pname(b, "w_out"));
    const NodeId b_out = bind_param(g, store, binding, pname(b, "b_out"));
    const NodeId logits = g.reshape(affine(g, h2, w_out, b_out), {batch, rows, b.out_dim});
    NodeId block = g.log_softmax(logits, 2);
    if (i == 0) block = g.reshape(block, {batch, config.n_nonterminals});
    *slots[i] = block;
  }
  return out;
}

RuleTableValues rule_table(const ArrayStore& store, const GrammarConfig& config,
                           const std::optional<Tensor>& z) {
  Graph g;
  ParamBinding binding;
  std::optional<NodeId> zn;
  if (z.has_value()) {
    Tensor zt = *z;
    if (zt.rank() == 1) zt = reshape(zt, {1, zt.size()});
    if (zt.rank() != 2 || zt.shape()[1] != config.z_dim) {
      throw GraphError("z must have " + std::to_string(config.z_dim) + " dimensions, got " +
                       shape_str(z->shape()));
    }
    zn = g.leaf(std::move(zt), /*trainable=*/false, "z");
  }
  const RuleTableNodes nodes = build_rule_table(g, store, binding, config, zn);
  g.forward();
  return {g.value(nodes.start), g.value(nodes.nonterminal), g.value(nodes.preterminal)};
}

}  // namespace grind
