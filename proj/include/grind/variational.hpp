// Inference network q(z|w): a sentence encoder producing a diagonal Gaussian
// posterior, reparameterized sampling, the analytic KL to a standard-normal
// prior, and the posterior mean used for MAP decoding.
//
// Encoder architecture (documented config, not contract): token embeddings
// feed a bidirectional tanh recurrence; the per-position states are max-pooled
// elementwise and two affine heads read off mu and logvar. logvar is clamped
// to [-8, 8] to keep exp(logvar) and the KL finite early in training.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "grind/netops.hpp"

namespace grind {

class VariationalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VariationalConfig {
  std::int64_t vocab_size = 0;
  std::int64_t emb_dim = 256;
  std::int64_t hidden_dim = 256;  // per direction
  std::int64_t z_dim = 64;

  void validate() const;
};

inline constexpr double kLogvarMin = -8.0;
inline constexpr double kLogvarMax = 8.0;

// Posterior for one sentence; mu and logvar are length-z_dim vectors.
struct LatentPosterior {
  Tensor mu;
  Tensor logvar;
};

// Graph handles for a batch of posteriors, each node shaped (batch, z_dim).
struct EncoderNodes {
  NodeId mu = -1;
  NodeId logvar = -1;
};

// Creates all encoder parameters in `store` under "encoder." names.
ParamBinding init_encoder(ArrayStore& store, const VariationalConfig& config, Rng& rng);

// Binds existing encoder parameters to graph leaves without reinitializing.
ParamBinding bind_encoder(Graph& g, const ArrayStore& store, const VariationalConfig& config,
                          bool trainable);

// Encodes a batch of equal-length sentences. Requires every sentence
// non-empty and of the same length, with ids inside the vocabulary.
EncoderNodes build_encoder(Graph& g, const std::vector<std::vector<std::int32_t>>& ids,
                           const VariationalConfig& config, const ParamBinding& binding);

// z = mu + exp(logvar / 2) * noise, differentiable in mu and logvar.
NodeId build_sample_z(Graph& g, const EncoderNodes& posterior, NodeId noise);

// Per-sentence KL(q || N(0, I)) as a (batch) node:
// 0.5 * sum_d (mu_d^2 + exp(logvar_d) - logvar_d - 1).
NodeId build_kl_to_prior(Graph& g, const EncoderNodes& posterior);

// Single-sentence conveniences over the graph builders.
LatentPosterior encode(const std::vector<std::int32_t>& ids, const VariationalConfig& config,
                       const ArrayStore& store);
Tensor sample_z(const LatentPosterior& posterior, const Tensor& noise);
double kl_to_prior(const LatentPosterior& posterior);

// MAP decoding collapses the posterior to its mean; no sampling.
Tensor map_embedding(const LatentPosterior& posterior);

}  // namespace grind
