// ELBO training: the batched loss graph, an adaptive-moment optimizer with
// global-norm clipping, per-seed training loops with same-length bucketing,
// validation-perplexity checkpoint selection, and NaN-abort per seed.

#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "grind/chart.hpp"
#include "grind/trainer_config.hpp"
#include "grind/treebank.hpp"

namespace grind {

// Best-by-validation-perplexity snapshot of one seed's parameters. Round
// trips bit-exactly through the array container, configs included.
struct Checkpoint {
  ArrayStore params;
  GrammarConfig grammar;
  VariationalConfig encoder;  // meaningful only when the grammar uses z
  std::int64_t epoch = -1;
  double val_perplexity = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

// Graph handles for one training batch. For an all-shared grammar the KL
// node is a constant zero and the noise input is ignored entirely.
struct ElboNodes {
  NodeId loss = -1;      // scalar (1): mean over the batch of -logZ + KL
  NodeId nll_mean = -1;  // scalar (1): mean -logZ
  NodeId kl_mean = -1;   // scalar (1): mean KL
  ParamBinding binding;  // every parameter leaf the loss depends on
};

ElboNodes build_elbo_loss(Graph& g, const std::vector<std::vector<std::int32_t>>& batch,
                          const ArrayStore& params, const TrainConfig& config,
                          const std::optional<Tensor>& noise, bool trainable);

struct ElboParts {
  double loss = 0.0;
  double nll = 0.0;
  double kl = 0.0;
};

// Convenience evaluation; `noise` must be (batch, z_dim) when the grammar
// depends on z. Every sentence must have length >= 2 and the same length.
ElboParts elbo_loss(const std::vector<std::vector<std::int32_t>>& batch,
                    const ArrayStore& params, const TrainConfig& config,
                    const std::optional<Tensor>& noise);

// Adaptive-moment optimizer state, keyed by parameter name.
struct AdamState {
  std::vector<Tensor> m, v;
  std::vector<std::string> names;
  std::int64_t t = 0;
};

// One update over named gradients; clips by global norm first. Returns the
// pre-clip norm. Gradient order must be identical across calls.
double adam_step(ArrayStore& params, const std::vector<std::pair<std::string, Tensor>>& grads,
                 AdamState& state, const TrainConfig& config);

// exp( sum_w -ELBO_MAP(w) / sum_w |w| ) where ELBO_MAP scores the likelihood
// at z = mu (no sampling) minus the KL; for an all-shared grammar this is
// exactly the token-level negative log-likelihood exponentiated.
double perplexity(const ArrayStore& params, const TrainConfig& config, const Corpus& corpus);
double perplexity(const Checkpoint& checkpoint, const Corpus& corpus);

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool diverged = false;
  std::string diagnostic;                // set when diverged
  Checkpoint best;                       // valid when at least one epoch finished
  std::vector<nlohmann::json> log;       // one record per completed epoch
};

struct TrainResult {
  std::vector<SeedOutcome> seeds;
  std::vector<const Checkpoint*> checkpoints() const;  // non-diverged bests
};

// Called after every epoch with {seed, epoch, loss, kl, val_perplexity}.
using EpochCallback = std::function<void(const nlohmann::json&)>;

// Full training: for seed s in [base_seed, base_seed + n_seeds), initialize
// parameters, run epochs of shuffled same-length batches, track the best
// validation perplexity. A non-finite loss aborts that seed only.
TrainResult train(const TrainConfig& config, const Corpus& train_corpus,
                  const Corpus& val_corpus, const EpochCallback& on_epoch = nullptr);

}  // namespace grind
