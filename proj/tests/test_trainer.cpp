#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "grind/config.hpp"
#include "grind/trainer.hpp"
#include "grind/variational.hpp"

using namespace grind;

namespace {

TrainConfig npcfg_config(std::int64_t nN, std::int64_t nP, std::int64_t vocab) {
  TrainConfig c;
  c.grammar.n_nonterminals = nN;
  c.grammar.n_preterminals = nP;
  c.grammar.vocab_size = vocab;
  c.grammar.sym_dim = 3;
  c.grammar.hidden_dim = 4;
  c.grammar.z_dim = 2;
  c.grammar.share_start = true;
  c.grammar.share_nonterminal = true;
  c.grammar.share_preterminal = true;
  c.max_train_len = 10;
  return c;
}

TrainConfig cpcfg_config(std::int64_t nN, std::int64_t nP, std::int64_t vocab) {
  TrainConfig c = npcfg_config(nN, nP, vocab);
  c.grammar.share_start = false;
  c.grammar.share_nonterminal = false;
  c.grammar.share_preterminal = false;
  c.encoder.vocab_size = vocab;
  c.encoder.emb_dim = 3;
  c.encoder.hidden_dim = 3;
  c.encoder.z_dim = c.grammar.z_dim;
  return c;
}

ArrayStore init_params(const TrainConfig& c, std::uint64_t seed) {
  ArrayStore store;
  Rng rng(seed);
  if (c.uses_z()) init_encoder(store, c.encoder, rng);
  init_grammar(store, c.grammar, rng);
  return store;
}

void zero_grammar_outputs(ArrayStore& store, const GrammarConfig& gc) {
  const std::int64_t rhs = gc.n_nonterminals + gc.n_preterminals;
  store.put("grammar.start.w_out", Tensor({gc.hidden_dim, gc.n_nonterminals}));
  store.put("grammar.start.b_out", Tensor({gc.n_nonterminals}));
  store.put("grammar.nonterminal.w_out", Tensor({gc.hidden_dim, rhs * rhs}));
  store.put("grammar.nonterminal.b_out", Tensor({rhs * rhs}));
  store.put("grammar.preterminal.w_out", Tensor({gc.hidden_dim, gc.vocab_size}));
  store.put("grammar.preterminal.b_out", Tensor({gc.vocab_size}));
}

Corpus make_corpus(std::int64_t vocab, const std::vector<std::int64_t>& lengths,
                   std::uint64_t seed) {
  Corpus corpus;
  Rng rng(seed);
  for (std::int64_t len : lengths) {
    Sentence s;
    for (std::int64_t i = 0; i < len; ++i) {
      s.ids.push_back(static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(vocab))));
    }
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

Tensor fixed_noise(std::int64_t rows, std::int64_t cols, std::uint64_t seed) {
  Tensor t({rows, cols});
  Rng rng(seed);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("all-shared grammars ignore noise and have exactly zero KL") {
  const TrainConfig c = npcfg_config(2, 3, 6);
  const ArrayStore params = init_params(c, 1);
  const std::vector<std::vector<std::int32_t>> batch = {{0, 1, 2}, {3, 4, 5}};
  const auto a = elbo_loss(batch, params, c, fixed_noise(2, c.grammar.z_dim, 5));
  const auto b = elbo_loss(batch, params, c, fixed_noise(2, c.grammar.z_dim, 99));
  const auto n = elbo_loss(batch, params, c, std::nullopt);
  CHECK(a.loss == b.loss);
  CHECK(a.loss == n.loss);
  CHECK(a.kl == 0.0);
  CHECK(a.loss == a.nll);
}

TEST_CASE("zeroed nets on the one-symbol grammar reproduce the closed form") {
  TrainConfig c = npcfg_config(1, 1, 1);
  ArrayStore params = init_params(c, 2);
  zero_grammar_outputs(params, c.grammar);
  const auto parts = elbo_loss({{0, 0}}, params, c, std::nullopt);
  CHECK(parts.loss == doctest::Approx(-std::log(0.25)).epsilon(1e-12));
  CHECK(parts.kl == 0.0);
}

TEST_CASE("malformed batches are rejected") {
  const TrainConfig c = npcfg_config(2, 2, 6);
  const ArrayStore params = init_params(c, 3);
  CHECK_THROWS_AS(elbo_loss({{0}}, params, c, std::nullopt), TrainError);
  CHECK_THROWS_AS(elbo_loss({{0, 1}, {0, 1, 2}}, params, c, std::nullopt), TrainError);
  CHECK_THROWS_AS(elbo_loss({}, params, c, std::nullopt), TrainError);

  const TrainConfig cz = cpcfg_config(2, 2, 6);
  const ArrayStore pz = init_params(cz, 3);
  CHECK_THROWS_AS(elbo_loss({{0, 1, 2}}, pz, cz, std::nullopt), TrainError);
  CHECK_THROWS_AS(elbo_loss({{0, 1, 2}}, pz, cz, fixed_noise(2, 2, 4)), TrainError);
}

TEST_CASE("the single-sample ELBO lower-bounds the marginal likelihood") {
  const TrainConfig c = cpcfg_config(2, 2, 3);
  const ArrayStore params = init_params(c, 4);
  const std::vector<std::int32_t> ids{0, 1, 2};

  const LatentPosterior post = encode(ids, c.encoder, params);
  const double kl = kl_to_prior(post);

  Rng rng(5);
  const auto logZ_at = [&](const Tensor& z) {
    const RuleTableValues vals = rule_table(params, c.grammar, z);
    return inside_logZ(ids, tables_from_batch(vals, 0));
  };

  // ELBO estimate: mean over posterior samples of logZ, minus the KL.
  const int q_draws = 1000;
  double elbo_mean = 0.0, elbo_m2 = 0.0;
  Tensor noise({c.grammar.z_dim});
  for (int s = 0; s < q_draws; ++s) {
    for (std::int64_t i = 0; i < noise.size(); ++i) noise[i] = rng.normal();
    const double value = logZ_at(sample_z(post, noise)) - kl;
    const double delta = value - elbo_mean;
    elbo_mean += delta / (s + 1);
    elbo_m2 += delta * (value - elbo_mean);
  }
  const double elbo_se = std::sqrt(elbo_m2 / (q_draws - 1.0) / q_draws);

  // Marginal likelihood estimate: mean over prior samples of Z(w | z).
  const int p_draws = 4000;
  double p_mean = 0.0, p_m2 = 0.0;
  Tensor z({c.grammar.z_dim});
  for (int s = 0; s < p_draws; ++s) {
    for (std::int64_t i = 0; i < z.size(); ++i) z[i] = rng.normal();
    const double value = std::exp(logZ_at(z));
    const double delta = value - p_mean;
    p_mean += delta / (s + 1);
    p_m2 += delta * (value - p_mean);
  }
  const double p_se = std::sqrt(p_m2 / (p_draws - 1.0) / p_draws);
  const double log_p = std::log(p_mean);
  const double log_p_se = p_se / p_mean;  // delta method

  CHECK(elbo_mean <= log_p + 3.0 * std::sqrt(elbo_se * elbo_se + log_p_se * log_p_se));
}

TEST_CASE("gradients check through the full compound loss") {
  const TrainConfig c = cpcfg_config(2, 2, 4);
  const ArrayStore params = init_params(c, 6);
  const std::vector<std::vector<std::int32_t>> batch = {{0, 1, 2}, {3, 2, 0}};
  Graph g;
  const ElboNodes nodes =
      build_elbo_loss(g, batch, params, c, fixed_noise(2, c.grammar.z_dim, 7), true);
  const auto report = g.check_gradients(nodes.loss, 1e-6, 1e-4);
  INFO(report.str());
  CHECK(report.pass);
}

TEST_CASE("adam takes the hand-computed step and reports the pre-clip norm") {
  TrainConfig c = npcfg_config(1, 1, 1);
  c.learning_rate = 0.1;
  c.beta1 = 0.5;
  c.beta2 = 0.9;
  c.grad_clip = 3.0;

  ArrayStore params;
  params.put("p", Tensor::from({2}, {1.0, -1.0}));
  AdamState state;
  const double norm = adam_step(params, {{"p", Tensor::from({2}, {3.0, 4.0})}}, state, c);
  CHECK(norm == doctest::Approx(5.0).epsilon(1e-12));

  // Clipped gradient is (1.8, 2.4); first-step bias correction makes
  // m_hat = g and sqrt(v_hat) = |g|, so the update is lr * sign(g) modulo eps.
  const Tensor& p = params.get("p");
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 * (1.8 / (1.8 + c.adam_eps))).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(-1.0 - 0.1 * (2.4 / (2.4 + c.adam_eps))).epsilon(1e-12));
  CHECK(state.t == 1);

  CHECK_THROWS_AS(adam_step(params, {{"q", Tensor({2})}}, state, c), TrainError);
}

TEST_CASE("perplexity matches the closed form on the uniform grammar") {
  TrainConfig c = npcfg_config(1, 1, 1);
  ArrayStore params = init_params(c, 8);
  zero_grammar_outputs(params, c.grammar);
  Corpus corpus;
  corpus.sentences.push_back({{0, 0}, {}});
  corpus.sentences.push_back({{0, 0, 0}, {}});
  // -logZ totals log 4 + log 8 = log 32 = 5 log 2 over 5 tokens.
  CHECK(perplexity(params, c, corpus) == doctest::Approx(2.0).epsilon(1e-12));

  CHECK_THROWS_AS(perplexity(params, c, Corpus{}), TrainError);
  Corpus bad;
  bad.sentences.push_back({{0}, {}});
  CHECK_THROWS_AS(perplexity(params, c, bad), TrainError);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  const TrainConfig c = cpcfg_config(2, 3, 5);
  Checkpoint ckpt;
  ckpt.params = init_params(c, 9);
  ckpt.grammar = c.grammar;
  ckpt.encoder = c.encoder;
  ckpt.epoch = 7;
  ckpt.val_perplexity = 13.25;
  ckpt.seed = 42;

  const auto dir = std::filesystem::temp_directory_path() / "grind_trainer_test";
  std::filesystem::create_directories(dir);
  const std::string path1 = (dir / "ckpt_a.grnd").string();
  const std::string path2 = (dir / "ckpt_b.grnd").string();
  ckpt.save(path1);
  const Checkpoint loaded = Checkpoint::load(path1);
  loaded.save(path2);
  CHECK(read_file(path1) == read_file(path2));
  CHECK(loaded.epoch == 7);
  CHECK(loaded.val_perplexity == 13.25);
  CHECK(loaded.seed == 42);
  CHECK(loaded.grammar.n_nonterminals == 2);
  CHECK(loaded.encoder.hidden_dim == c.encoder.hidden_dim);
  REQUIRE(loaded.params.names() == ckpt.params.names());
  for (const auto& name : ckpt.params.names()) {
    CHECK(tensors_equal(loaded.params.get(name), ckpt.params.get(name)));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("training runs, selects checkpoints, and is seed-reproducible") {
  TrainConfig c = npcfg_config(2, 3, 6);
  c.epochs = 2;
  c.n_seeds = 2;
  c.batch_size = 4;
  const Corpus train_corpus = make_corpus(6, {3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5}, 10);
  const Corpus val_corpus = make_corpus(6, {3, 4, 4, 5}, 11);

  const TrainResult result = train(c, train_corpus, val_corpus);
  REQUIRE(result.seeds.size() == 2);
  for (const auto& outcome : result.seeds) {
    CHECK_FALSE(outcome.diverged);
    CHECK(outcome.log.size() == 2);
    CHECK(outcome.best.epoch >= 0);
    CHECK(std::isfinite(outcome.best.val_perplexity));
  }
  CHECK(result.checkpoints().size() == 2);
  CHECK_FALSE(tensors_equal(result.seeds[0].best.params.get("grammar.emb_nonterminal"),
                            result.seeds[1].best.params.get("grammar.emb_nonterminal")));

  TrainConfig c1 = c;
  c1.n_seeds = 1;
  const TrainResult rerun = train(c1, train_corpus, val_corpus);
  REQUIRE(rerun.seeds.size() == 1);
  CHECK(rerun.seeds[0].log == result.seeds[0].log);
  const auto& a = rerun.seeds[0].best.params;
  const auto& b = result.seeds[0].best.params;
  REQUIRE(a.names() == b.names());
  for (const auto& name : a.names()) CHECK(tensors_equal(a.get(name), b.get(name)));
}

TEST_CASE("one epoch means one validation evaluation") {
  TrainConfig c = npcfg_config(2, 2, 5);
  c.epochs = 1;
  c.n_seeds = 1;
  const Corpus train_corpus = make_corpus(5, {3, 3, 4, 4}, 12);
  const Corpus val_corpus = make_corpus(5, {3, 4}, 13);
  int calls = 0;
  const TrainResult result =
      train(c, train_corpus, val_corpus, [&](const nlohmann::json&) { ++calls; });
  CHECK(calls == 1);
  CHECK(result.seeds[0].log.size() == 1);
  CHECK(result.seeds[0].best.epoch == 0);
}

TEST_CASE("the compound path trains end to end") {
  TrainConfig c = cpcfg_config(2, 2, 6);
  c.epochs = 1;
  c.n_seeds = 1;
  const Corpus train_corpus = make_corpus(6, {3, 3, 3, 4, 4, 4}, 14);
  const Corpus val_corpus = make_corpus(6, {3, 4}, 15);
  const TrainResult result = train(c, train_corpus, val_corpus);
  REQUIRE(result.seeds.size() == 1);
  CHECK_FALSE(result.seeds[0].diverged);
  const auto& record = result.seeds[0].log[0];
  CHECK(record.at("kl").get<double>() >= 0.0);
  CHECK(std::isfinite(record.at("loss").get<double>()));
}

TEST_CASE("training rejects malformed corpora") {
  TrainConfig c = npcfg_config(2, 2, 5);
  const Corpus good = make_corpus(5, {3, 3}, 16);
  CHECK_THROWS_AS(train(c, Corpus{}, good), TrainError);
  CHECK_THROWS_AS(train(c, good, Corpus{}), TrainError);
  Corpus short_one = good;
  short_one.sentences.push_back({{0}, {}});
  CHECK_THROWS_AS(train(c, short_one, good), TrainError);
  Corpus long_one = good;
  long_one.sentences.push_back(
      {std::vector<std::int32_t>(static_cast<std::size_t>(c.max_train_len) + 1, 0), {}});
  CHECK_THROWS_AS(train(c, long_one, good), TrainError);
}

TEST_CASE("a divergent run aborts its seed with a diagnostic") {
  TrainConfig c = npcfg_config(2, 2, 5);
  c.learning_rate = 1e200;
  c.epochs = 2;
  c.n_seeds = 2;
  const Corpus train_corpus = make_corpus(5, {3, 3, 3, 3, 4, 4, 4, 4}, 17);
  const Corpus val_corpus = make_corpus(5, {3, 4}, 18);
  const TrainResult result = train(c, train_corpus, val_corpus);
  REQUIRE(result.seeds.size() == 2);
  for (const auto& outcome : result.seeds) {
    CHECK(outcome.diverged);
    CHECK(outcome.diagnostic.find("diverged") != std::string::npos);
  }
  CHECK(result.checkpoints().empty());
}

TEST_CASE("train config validation catches bad settings") {
  TrainConfig c = npcfg_config(2, 2, 5);
  c.max_train_len = 25;
  CHECK_THROWS_AS(c.validate(), TrainError);
  c.max_train_len = 20;
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), TrainError);
  c.epochs = 1;
  c.validate();

  TrainConfig mismatch = cpcfg_config(2, 2, 5);
  mismatch.encoder.z_dim = mismatch.grammar.z_dim + 1;
  CHECK_THROWS_AS(mismatch.validate(), TrainError);
}

}  // TEST_SUITE
