#include "grind/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "grind/config.hpp"
#include "grind/variational.hpp"

namespace grind {

namespace {

void check_batch_lengths(const std::vector<std::vector<std::int32_t>>& batch) {
  if (batch.empty()) throw TrainError("empty batch");
  const std::size_t n = batch.front().size();
  for (const auto& sent : batch) {
    if (sent.size() < 2) {
      throw TrainError("length-" + std::to_string(sent.size()) +
                       " sentence reached the trainer; it should have been filtered");
    }
    if (sent.size() != n) throw TrainError("batch mixes sentence lengths");
  }
}

// Mean over a (batch) vector as a (1) scalar node.
NodeId mean_node(Graph& g, NodeId v, std::int64_t batch) {
  const NodeId weights =
      g.leaf(Tensor::full({batch, 1}, 1.0 / static_cast<double>(batch)));
  return g.reshape(g.matmul(g.reshape(v, {1, batch}), weights), {1});
}

}  // namespace

ElboNodes build_elbo_loss(Graph& g, const std::vector<std::vector<std::int32_t>>& batch,
                          const ArrayStore& params, const TrainConfig& config,
                          const std::optional<Tensor>& noise, bool trainable) {
  check_batch_lengths(batch);
  const std::int64_t b = static_cast<std::int64_t>(batch.size());

  ElboNodes out;
  std::optional<NodeId> z;
  NodeId kl = -1;
  if (config.uses_z()) {
    if (!noise.has_value()) throw TrainError("this grammar needs per-sentence noise");
    if (noise->shape() != Shape{b, config.encoder.z_dim}) {
      throw TrainError("noise must be (batch, z_dim)");
    }
    out.binding = bind_encoder(g, params, config.encoder, trainable);
    const EncoderNodes enc = build_encoder(g, batch, config.encoder, out.binding);
    z = build_sample_z(g, enc, g.leaf(*noise));
    kl = build_kl_to_prior(g, enc);
  }
  const RuleTableNodes tables = build_rule_table(g, params, out.binding, config.grammar, z);
  const NodeId logZ =
      build_inside_logZ(g, batch, {tables.start, tables.nonterminal, tables.preterminal});

  const NodeId neg = g.leaf(Tensor::from({1}, {-1.0}));
  const NodeId nll = g.mul(logZ, neg);
  out.nll_mean = mean_node(g, nll, b);
  if (config.uses_z()) {
    out.kl_mean = mean_node(g, kl, b);
    out.loss = g.add(out.nll_mean, out.kl_mean);
  } else {
    out.kl_mean = g.leaf(Tensor({1}));  // exactly zero, not an approximation
    out.loss = out.nll_mean;
  }
  return out;
}

ElboParts elbo_loss(const std::vector<std::vector<std::int32_t>>& batch,
                    const ArrayStore& params, const TrainConfig& config,
                    const std::optional<Tensor>& noise) {
  Graph g;
  const ElboNodes nodes = build_elbo_loss(g, batch, params, config, noise, /*trainable=*/false);
  g.forward();
  ElboParts parts;
  parts.loss = g.value(nodes.loss)[0];
  parts.nll = g.value(nodes.nll_mean)[0];
  parts.kl = g.value(nodes.kl_mean)[0];
  return parts;
}

double adam_step(ArrayStore& params, const std::vector<std::pair<std::string, Tensor>>& grads,
                 AdamState& state, const TrainConfig& config) {
  double sq_norm = 0.0;
  for (const auto& [name, grad] : grads) {
    (void)name;
    for (std::int64_t i = 0; i < grad.size(); ++i) sq_norm += grad[i] * grad[i];
  }
  const double norm = std::sqrt(sq_norm);
  const double scale = norm > config.grad_clip ? config.grad_clip / norm : 1.0;

  if (state.t == 0) {
    state.names.reserve(grads.size());
    for (const auto& [name, grad] : grads) {
      state.names.push_back(name);
      state.m.emplace_back(grad.shape());
      state.v.emplace_back(grad.shape());
    }
  } else if (state.names.size() != grads.size()) {
    throw TrainError("gradient list changed size between optimizer steps");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));

  for (std::size_t p = 0; p < grads.size(); ++p) {
    const auto& [name, grad] = grads[p];
    if (name != state.names[p]) {
      throw TrainError("gradient order changed between optimizer steps");
    }
    Tensor value = params.get(name);
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    for (std::int64_t i = 0; i < grad.size(); ++i) {
      const double gi = grad[i] * scale;
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      value[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
    }
    params.put(name, std::move(value));
  }
  return norm;
}

double perplexity(const ArrayStore& params, const TrainConfig& config, const Corpus& corpus) {
  if (corpus.sentences.empty()) throw TrainError("perplexity needs a non-empty corpus");
  // Bucket by length so sentences batch, then restore index order before the
  // final summation so the result does not depend on bucketing.
  std::map<std::int64_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
    if (corpus.sentences[i].ids.size() < 2) {
      throw TrainError("perplexity corpus has a sentence shorter than 2 tokens");
    }
    buckets[corpus.sentences[i].length()].push_back(i);
  }
  constexpr std::size_t kChunk = 16;
  std::vector<double> neg_elbo(corpus.sentences.size(), 0.0);
  std::int64_t total_tokens = 0;
  for (const auto& [len, indices] : buckets) {
    total_tokens += len * static_cast<std::int64_t>(indices.size());
    for (std::size_t at = 0; at < indices.size(); at += kChunk) {
      const std::size_t hi = std::min(at + kChunk, indices.size());
      std::vector<std::vector<std::int32_t>> batch;
      batch.reserve(hi - at);
      for (std::size_t k = at; k < hi; ++k) batch.push_back(corpus.sentences[indices[k]].ids);

      Graph g;
      ParamBinding binding;
      std::optional<NodeId> z;
      NodeId kl = -1;
      if (config.uses_z()) {
        binding = bind_encoder(g, params, config.encoder, false);
        const EncoderNodes enc = build_encoder(g, batch, config.encoder, binding);
        z = enc.mu;  // MAP bound: no sampling
        kl = build_kl_to_prior(g, enc);
      }
      const RuleTableNodes tables = build_rule_table(g, params, binding, config.grammar, z);
      const NodeId logZ =
          build_inside_logZ(g, batch, {tables.start, tables.nonterminal, tables.preterminal});
      g.forward();
      for (std::size_t k = at; k < hi; ++k) {
        const std::int64_t row = static_cast<std::int64_t>(k - at);
        double value = -g.value(logZ)[row];
        if (config.uses_z()) value += g.value(kl)[row];
        neg_elbo[indices[k]] = value;
      }
    }
  }
  double total = 0.0;
  for (double v : neg_elbo) total += v;
  return std::exp(total / static_cast<double>(total_tokens));
}

double perplexity(const Checkpoint& checkpoint, const Corpus& corpus) {
  TrainConfig config;
  config.grammar = checkpoint.grammar;
  config.encoder = checkpoint.encoder;
  return perplexity(checkpoint.params, config, corpus);
}

void Checkpoint::save(const std::string& path) const {
  ArrayStore store = params;
  store.meta["grammar"] = grammar_config_to_json(grammar);
  store.meta["encoder"] = encoder_config_to_json(encoder);
  store.meta["checkpoint"] = {{"epoch", epoch}, {"val_perplexity", val_perplexity}, {"seed", seed}};
  store.save(path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  Checkpoint ckpt;
  ckpt.params = ArrayStore::load(path);
  try {
    ckpt.grammar = grammar_config_from_json(ckpt.params.meta.at("grammar"));
    ckpt.encoder = encoder_config_from_json(ckpt.params.meta.at("encoder"));
    const auto& c = ckpt.params.meta.at("checkpoint");
    ckpt.epoch = c.at("epoch").get<std::int64_t>();
    ckpt.val_perplexity = c.at("val_perplexity").get<double>();
    ckpt.seed = c.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw TrainError("checkpoint at '" + path + "' has malformed metadata: " + e.what());
  }
  ckpt.params.meta.erase("grammar");
  ckpt.params.meta.erase("encoder");
  ckpt.params.meta.erase("checkpoint");
  return ckpt;
}

std::vector<const Checkpoint*> TrainResult::checkpoints() const {
  std::vector<const Checkpoint*> out;
  for (const auto& outcome : seeds) {
    if (!outcome.diverged && outcome.best.epoch >= 0) out.push_back(&outcome.best);
  }
  return out;
}

namespace {

struct SeedRun {
  const TrainConfig& config;
  const Corpus& train_corpus;
  const Corpus& val_corpus;
  std::uint64_t seed;
  const EpochCallback& on_epoch;

  SeedOutcome run() {
    SeedOutcome outcome;
    outcome.seed = seed;
    Rng rng(seed);

    ArrayStore params;
    if (config.uses_z()) init_encoder(params, config.encoder, rng);
    init_grammar(params, config.grammar, rng);

    // Same-length buckets, fixed once; epoch shuffles reorder within and
    // across buckets but never regroup lengths.
    std::map<std::int64_t, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < train_corpus.sentences.size(); ++i) {
      buckets[train_corpus.sentences[i].length()].push_back(i);
    }

    AdamState adam;
    for (std::int64_t epoch = 0; epoch < config.epochs; ++epoch) {
      std::vector<std::vector<std::size_t>> batches;
      for (auto& [len, indices] : buckets) {
        (void)len;
        rng.shuffle(indices);
        for (std::size_t at = 0; at < indices.size();
             at += static_cast<std::size_t>(config.batch_size)) {
          const std::size_t hi =
              std::min(at + static_cast<std::size_t>(config.batch_size), indices.size());
          batches.emplace_back(indices.begin() + at, indices.begin() + hi);
        }
      }
      rng.shuffle(batches);

      double loss_sum = 0.0, kl_sum = 0.0;
      std::int64_t seen = 0;
      for (std::size_t bi = 0; bi < batches.size(); ++bi) {
        std::vector<std::vector<std::int32_t>> batch;
        batch.reserve(batches[bi].size());
        for (std::size_t idx : batches[bi]) batch.push_back(train_corpus.sentences[idx].ids);

        std::optional<Tensor> noise;
        if (config.uses_z()) {
          Tensor n({static_cast<std::int64_t>(batch.size()), config.encoder.z_dim});
          for (std::int64_t i = 0; i < n.size(); ++i) n[i] = rng.normal();
          noise = std::move(n);
        }

        Graph g;
        const ElboNodes nodes =
            build_elbo_loss(g, batch, params, config, noise, /*trainable=*/true);
        g.forward();
        const double loss = g.value(nodes.loss)[0];
        if (!std::isfinite(loss)) {
          outcome.diverged = true;
          outcome.diagnostic = "seed " + std::to_string(seed) + " diverged: non-finite loss at epoch " +
                               std::to_string(epoch) + ", batch " + std::to_string(bi);
          return outcome;
        }
        g.backward(nodes.loss);

        std::vector<std::pair<std::string, Tensor>> grads;
        grads.reserve(nodes.binding.leaves.size());
        for (const auto& [name, leaf] : nodes.binding.leaves) {
          grads.emplace_back(name, g.grad(leaf));
        }
        adam_step(params, grads, adam, config);

        const auto b = static_cast<double>(batch.size());
        loss_sum += loss * b;
        kl_sum += g.value(nodes.kl_mean)[0] * b;
        seen += static_cast<std::int64_t>(batch.size());
      }

      const double val_perp = perplexity(params, config, val_corpus);
      if (!std::isfinite(val_perp)) {
        outcome.diverged = true;
        outcome.diagnostic = "seed " + std::to_string(seed) +
                             " diverged: non-finite validation perplexity at epoch " +
                             std::to_string(epoch);
        return outcome;
      }
      if (val_perp < outcome.best.val_perplexity) {
        outcome.best.params = params;
        outcome.best.grammar = config.grammar;
        outcome.best.encoder = config.encoder;
        outcome.best.epoch = epoch;
        outcome.best.val_perplexity = val_perp;
        outcome.best.seed = seed;
      }
      nlohmann::json record = {{"seed", seed},
                               {"epoch", epoch},
                               {"loss", loss_sum / static_cast<double>(seen)},
                               {"kl", kl_sum / static_cast<double>(seen)},
                               {"val_perplexity", val_perp}};
      outcome.log.push_back(record);
      if (on_epoch) on_epoch(record);
    }
    return outcome;
  }
};

}  // namespace

TrainResult train(const TrainConfig& config, const Corpus& train_corpus,
                  const Corpus& val_corpus, const EpochCallback& on_epoch) {
  config.validate();
  if (train_corpus.sentences.empty()) throw TrainError("training corpus is empty");
  if (val_corpus.sentences.empty()) throw TrainError("validation corpus is empty");
  for (const Sentence& s : train_corpus.sentences) {
    if (s.ids.size() < 2) throw TrainError("training corpus has a sentence shorter than 2 tokens");
    if (static_cast<std::int64_t>(s.ids.size()) > config.max_train_len) {
      throw TrainError("training corpus has a sentence over max_train_len; preprocess first");
    }
  }
  TrainResult result;
  for (std::int64_t s = 0; s < config.n_seeds; ++s) {
    SeedRun run{config, train_corpus, val_corpus, config.base_seed + static_cast<std::uint64_t>(s),
                on_epoch};
    result.seeds.push_back(run.run());
  }
  return result;
}

}  // namespace grind
