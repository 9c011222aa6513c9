// Training hyperparameters, split out so config serialization and the trainer
// can share the type without a dependency cycle.

#pragma once

#include <cstdint>
#include <stdexcept>

#include "grind/grammar.hpp"
#include "grind/variational.hpp"

namespace grind {

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  GrammarConfig grammar;
  VariationalConfig encoder;

  std::int64_t max_train_len = 40;  // one of 10, 20, 30, 40, 50
  std::int64_t epochs = 30;
  std::int64_t n_seeds = 4;
  std::uint64_t base_seed = 0;
  std::int64_t batch_size = 4;
  double learning_rate = 1e-3;
  double beta1 = 0.75;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 3.0;

  bool uses_z() const { return !grammar.all_shared(); }

  void validate() const {
    grammar.validate();
    if (uses_z()) {
      encoder.validate();
      if (encoder.z_dim != grammar.z_dim) {
        throw TrainError("encoder z_dim differs from grammar z_dim");
      }
      if (encoder.vocab_size != grammar.vocab_size) {
        throw TrainError("encoder vocab differs from grammar vocab");
      }
    }
    if (epochs < 1) throw TrainError("epochs must be at least 1");
    if (n_seeds < 1) throw TrainError("need at least one seed");
    if (batch_size < 1) throw TrainError("batch size must be at least 1");
    if (max_train_len != 10 && max_train_len != 20 && max_train_len != 30 &&
        max_train_len != 40 && max_train_len != 50) {
      throw TrainError("max_train_len must be one of 10, 20, 30, 40, 50");
    }
    if (learning_rate <= 0.0 || grad_clip <= 0.0 || adam_eps <= 0.0) {
      throw TrainError("learning rate, clip, and eps must be positive");
    }
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
      throw TrainError("moment decays must lie in [0, 1)");
    }
  }
};

}  // namespace grind
