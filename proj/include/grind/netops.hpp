// Small helpers shared by the grammar and encoder networks: parameter
// initialization into an ArrayStore and binding store entries to graph leaves.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "grind/graph.hpp"
#include "grind/rng.hpp"
#include "grind/serialize.hpp"

namespace grind {

// Tracks which graph leaf holds which named parameter, so the optimizer can
// pair gradients with store entries.
struct ParamBinding {
  std::vector<std::pair<std::string, NodeId>> leaves;

  NodeId at(const std::string& name) const {
    for (const auto& [n, id] : leaves) {
      if (n == name) return id;
    }
    throw GraphError("no bound parameter named '" + name + "'");
  }
};

inline NodeId bind_param(Graph& g, const ArrayStore& store, ParamBinding& binding,
                         const std::string& name) {
  const NodeId id = g.leaf(store.get(name), /*trainable=*/true, name);
  binding.leaves.emplace_back(name, id);
  return id;
}

inline void init_normal(ArrayStore& store, const std::string& name, Shape shape,
                        double stddev, Rng& rng) {
  Tensor t(shape);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * stddev;
  store.put(name, std::move(t));
}

inline void init_zeros(ArrayStore& store, const std::string& name, Shape shape) {
  store.put(name, Tensor(std::move(shape)));
}

// Xavier/Glorot scaling for a [fan_in, fan_out] weight matrix.
inline void init_xavier(ArrayStore& store, const std::string& name, std::int64_t fan_in,
                        std::int64_t fan_out, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  init_normal(store, name, {fan_in, fan_out}, stddev, rng);
}

// x @ w + b with x rank 2.
inline NodeId affine(Graph& g, NodeId x, NodeId w, NodeId b) {
  return g.add(g.matmul(x, w), b);
}

// Elementwise clamp to [lo, hi] built from relu:
//   max(x, lo) = relu(x - lo) + lo, min(y, hi) = hi - relu(hi - y).
inline NodeId clamp(Graph& g, NodeId x, double lo, double hi) {
  const NodeId lo_c = g.leaf(Tensor::from({1}, {lo}));
  const NodeId hi_c = g.leaf(Tensor::from({1}, {hi}));
  const NodeId neg = g.leaf(Tensor::from({1}, {-1.0}));
  const NodeId floored = g.add(g.relu(g.add(x, g.mul(lo_c, neg))), lo_c);
  return g.add(g.mul(g.relu(g.add(hi_c, g.mul(floored, neg))), neg), hi_c);
}

}  // namespace grind
