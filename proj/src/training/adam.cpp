#include "reldet/training/adam.hpp"

#include <cmath>
#include <string>

#include "reldet/errors.hpp"

namespace reldet::training {

namespace nm = reldet::numeric;

OptimizerState make_optimizer(const model::ModelParams& params, const AdamSettings& settings) {
  OptimizerState state;
  state.settings = settings;
  for (const auto& [name, t] : params.entries()) {
    state.first_moment.push_back(nm::Tensor::zeros(t.shape()));
    state.second_moment.push_back(nm::Tensor::zeros(t.shape()));
  }
  return state;
}

void adam_step(model::ModelParams& params, std::span<const nm::Tensor> grads,
               OptimizerState& state) {
  auto& entries = params.entries();
  if (grads.size() != entries.size() || state.first_moment.size() != entries.size())
    throw DimensionError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(entries.size()) + " parameters");
  for (std::size_t p = 0; p < entries.size(); ++p) {
    if (grads[p].shape() != entries[p].second.shape())
      throw DimensionError("adam_step: gradient shape " + nm::shape_str(grads[p].shape()) +
                           " for parameter '" + entries[p].first + "' " +
                           nm::shape_str(entries[p].second.shape()));
    for (double g : grads[p].data())
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient for parameter '" + entries[p].first + "'");
  }

  const AdamSettings& s = state.settings;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(s.beta1, t);
  const double correct2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t p = 0; p < entries.size(); ++p) {
    auto value = entries[p].second.mutable_data();
    auto m = state.first_moment[p].mutable_data();
    auto v = state.second_moment[p].mutable_data();
    const auto g = grads[p].data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
      value[i] -= s.lr * (m[i] / correct1) / (std::sqrt(v[i] / correct2) + s.eps);
    }
  }
}

}  // namespace reldet::training
