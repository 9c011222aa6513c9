#include "grind/variational.hpp"

#include <cmath>

namespace grind {

namespace {

void check_batch(const std::vector<std::vector<std::int32_t>>& ids, std::int64_t vocab) {
  if (ids.empty()) throw VariationalError("encoder needs at least one sentence");
  const std::size_t n = ids.front().size();
  if (n == 0) throw VariationalError("encoder input sentence is empty");
  for (const auto& sent : ids) {
    if (sent.size() != n) {
      throw VariationalError("encoder batch mixes sentence lengths");
    }
    for (std::int32_t id : sent) {
      if (id < 0 || id >= vocab) {
        throw VariationalError("token id " + std::to_string(id) + " outside vocabulary of " +
                               std::to_string(vocab));
      }
    }
  }
}

}  // namespace

void VariationalConfig::validate() const {
  if (vocab_size < 1) throw VariationalError("vocab_size must be positive");
  if (emb_dim < 1 || hidden_dim < 1 || z_dim < 1) {
    throw VariationalError("encoder dimensions must be positive");
  }
}

ParamBinding init_encoder(ArrayStore& store, const VariationalConfig& config, Rng& rng) {
  config.validate();
  init_normal(store, "encoder.emb", {config.vocab_size, config.emb_dim}, 1.0, rng);
  for (const char* dir : {"fw", "bw"}) {
    const std::string p = std::string("encoder.") + dir;
    init_xavier(store, p + ".w_x", config.emb_dim, config.hidden_dim, rng);
    init_xavier(store, p + ".w_h", config.hidden_dim, config.hidden_dim, rng);
    init_zeros(store, p + ".b", {1, config.hidden_dim});
  }
  for (const char* head : {"mu", "logvar"}) {
    const std::string p = std::string("encoder.") + head;
    init_xavier(store, p + ".w", 2 * config.hidden_dim, config.z_dim, rng);
    init_zeros(store, p + ".b", {1, config.z_dim});
  }
  ParamBinding binding;
  for (const auto& name : store.names()) {
    if (name.rfind("encoder.", 0) == 0) binding.leaves.emplace_back(name, NodeId{-1});
  }
  return binding;
}

ParamBinding bind_encoder(Graph& g, const ArrayStore& store, const VariationalConfig& config,
                          bool trainable) {
  config.validate();
  ParamBinding binding;
  for (const auto& name : store.names()) {
    if (name.rfind("encoder.", 0) != 0) continue;
    const NodeId id = g.leaf(store.get(name), trainable, name);
    binding.leaves.emplace_back(name, id);
  }
  if (binding.leaves.empty()) throw VariationalError("store holds no encoder parameters");
  return binding;
}

EncoderNodes build_encoder(Graph& g, const std::vector<std::vector<std::int32_t>>& ids,
                           const VariationalConfig& config, const ParamBinding& binding) {
  config.validate();
  check_batch(ids, config.vocab_size);
  const std::int64_t batch = static_cast<std::int64_t>(ids.size());
  const std::int64_t n = static_cast<std::int64_t>(ids.front().size());

  const NodeId emb = binding.at("encoder.emb");

  // Per-position embedding rows, each (batch, emb_dim).
  std::vector<NodeId> x(n);
  for (std::int64_t t = 0; t < n; ++t) {
    if (batch == 1) {
      x[t] = g.slice(emb, 0, ids[0][t], ids[0][t] + 1);
      continue;
    }
    std::vector<NodeId> rows;
    rows.reserve(ids.size());
    for (const auto& sent : ids) rows.push_back(g.slice(emb, 0, sent[t], sent[t] + 1));
    x[t] = g.concat(rows, 0);
  }

  auto run_direction = [&](const char* dir, bool reversed) {
    const std::string p = std::string("encoder.") + dir;
    const NodeId w_x = binding.at(p + ".w_x");
    const NodeId w_h = binding.at(p + ".w_h");
    const NodeId b = binding.at(p + ".b");
    std::vector<NodeId> states(n);
    NodeId prev = -1;
    for (std::int64_t step = 0; step < n; ++step) {
      const std::int64_t t = reversed ? n - 1 - step : step;
      NodeId pre = g.add(g.matmul(x[t], w_x), b);
      if (prev >= 0) pre = g.add(pre, g.matmul(prev, w_h));
      prev = g.tanh(pre);
      states[t] = prev;
    }
    return states;
  };

  const auto fw = run_direction("fw", false);
  const auto bw = run_direction("bw", true);

  NodeId pooled;
  if (n == 1) {
    pooled = g.concat({fw[0], bw[0]}, 1);
  } else {
    std::vector<NodeId> stacked;
    stacked.reserve(n);
    for (std::int64_t t = 0; t < n; ++t) {
      stacked.push_back(
          g.reshape(g.concat({fw[t], bw[t]}, 1), {batch, 1, 2 * config.hidden_dim}));
    }
    pooled = g.reshape(g.max_reduce(g.concat(stacked, 1), 1), {batch, 2 * config.hidden_dim});
  }

  EncoderNodes out;
  out.mu = affine(g, pooled, binding.at("encoder.mu.w"), binding.at("encoder.mu.b"));
  const NodeId raw = affine(g, pooled, binding.at("encoder.logvar.w"), binding.at("encoder.logvar.b"));
  out.logvar = clamp(g, raw, kLogvarMin, kLogvarMax);
  return out;
}

NodeId build_sample_z(Graph& g, const EncoderNodes& posterior, NodeId noise) {
  const NodeId half = g.leaf(Tensor::from({1}, {0.5}));
  const NodeId sigma = g.exp(g.mul(posterior.logvar, half));
  return g.add(posterior.mu, g.mul(sigma, noise));
}

NodeId build_kl_to_prior(Graph& g, const EncoderNodes& posterior) {
  const Shape& s = g.shape_of(posterior.mu);
  const std::int64_t batch = s[0];
  const std::int64_t z_dim = s[1];
  const NodeId neg = g.leaf(Tensor::from({1}, {-1.0}));
  const NodeId mu2 = g.mul(posterior.mu, posterior.mu);
  const NodeId var = g.exp(posterior.logvar);
  const NodeId inner = g.add(g.add(g.add(mu2, var), g.mul(posterior.logvar, neg)), neg);
  const NodeId half_ones = g.leaf(Tensor::full({z_dim, 1}, 0.5));
  return g.reshape(g.matmul(inner, half_ones), {batch});
}

LatentPosterior encode(const std::vector<std::int32_t>& ids, const VariationalConfig& config,
                       const ArrayStore& store) {
  Graph g;
  const ParamBinding binding = bind_encoder(g, store, config, /*trainable=*/false);
  const EncoderNodes nodes = build_encoder(g, {ids}, config, binding);
  g.forward();
  LatentPosterior post;
  post.mu = reshape(g.value(nodes.mu), {config.z_dim});
  post.logvar = reshape(g.value(nodes.logvar), {config.z_dim});
  return post;
}

Tensor sample_z(const LatentPosterior& posterior, const Tensor& noise) {
  if (noise.shape() != posterior.mu.shape()) {
    throw VariationalError("noise shape does not match the posterior dimension");
  }
  Tensor z(posterior.mu.shape());
  for (std::int64_t i = 0; i < z.size(); ++i) {
    z[i] = posterior.mu[i] + std::exp(0.5 * posterior.logvar[i]) * noise[i];
  }
  return z;
}

double kl_to_prior(const LatentPosterior& posterior) {
  double total = 0.0;
  for (std::int64_t i = 0; i < posterior.mu.size(); ++i) {
    const double mu = posterior.mu[i];
    const double lv = posterior.logvar[i];
    total += mu * mu + std::exp(lv) - lv - 1.0;
  }
  return 0.5 * total;
}

Tensor map_embedding(const LatentPosterior& posterior) { return posterior.mu; }

}  // namespace grind
