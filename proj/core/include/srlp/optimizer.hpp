#pragma once

#include <cstddef>

#include "srlp/model.hpp"

namespace srlp {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Decoupled (AdamW-style) decay; 0 disables it.
  double weight_decay = 0.0;
};

/// Bias-corrected Adam over every tensor of ModelParams.
class AdamOptimizer {
 public:
  AdamOptimizer(const ModelConfig& config, AdamConfig adam = {});

  /// Throws NonFinite naming the first offending tensor before touching params.
  void step(ModelParams& params, const ModelParams& grads, double learning_rate);

  std::size_t steps() const noexcept { return steps_; }
  const AdamConfig& config() const noexcept { return adam_; }

 private:
  AdamConfig adam_;
  ModelParams first_moment_;
  ModelParams second_moment_;
  std::size_t steps_ = 0;
};

}  // namespace srlp
