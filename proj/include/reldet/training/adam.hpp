#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "reldet/model/config.hpp"

namespace reldet::training {

struct AdamSettings {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates aligned with ModelParams::entries().
struct OptimizerState {
  AdamSettings settings;
  std::uint64_t step = 0;
  std::vector<numeric::Tensor> first_moment;
  std::vector<numeric::Tensor> second_moment;
};

OptimizerState make_optimizer(const model::ModelParams& params, const AdamSettings& settings = {});

/// Bias-corrected Adam update. `grads` is aligned with params.entries().
/// Throws NumericError naming the first parameter with a non-finite gradient;
/// in that case nothing is modified.
void adam_step(model::ModelParams& params, std::span<const numeric::Tensor> grads,
               OptimizerState& state);

}  // namespace reldet::training
