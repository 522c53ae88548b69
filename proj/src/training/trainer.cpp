#include "reldet/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "reldet/errors.hpp"
#include "reldet/random.hpp"

namespace reldet::training {

namespace nm = reldet::numeric;

SceneLoss scene_loss(const data::Scene& scene, const model::ModelParams& params,
                     const model::ModelConfig& config, const LossSettings& loss,
                     const matching::Assignment* fixed) {
  const model::ForwardResult out = model::forward(scene.image, params, config);
  const auto finite = [](const nm::Tensor& t) {
    return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
  };
  if (!finite(out.heads.probs) || !finite(out.heads.boxes))
    throw NumericError("non-finite model output");
  SceneLoss result;
  result.targets = matching::pad_targets(scene.objects, config.num_queries, config.null_class());
  if (fixed) {
    result.assignment = *fixed;
  } else {
    const model::DetectionOutput det = out.detections();
    result.assignment = matching::hungarian(
        matching::build_cost_matrix(result.targets, det.predictions, loss.weights));
  }
  result.terms = matching::hungarian_loss(result.targets, out.heads.probs, out.heads.boxes,
                                          result.assignment, loss.weights, loss.null_weight);
  return result;
}

LossBreakdown train_step(const data::Scene& scene, model::ModelParams& params,
                         OptimizerState& state, const model::ModelConfig& config,
                         const LossSettings& loss) {
  nm::Tape tape;
  const model::ModelParams watched = params.watch(tape);
  const SceneLoss sl = scene_loss(scene, watched, config, loss);
  const LossBreakdown result{sl.terms.total.item(), sl.terms.classification.item(),
                             sl.terms.box.item()};
  if (!std::isfinite(result.total)) throw NumericError("non-finite loss");

  tape.backward(sl.terms.total);
  std::vector<nm::Tensor> grads;
  grads.reserve(watched.size());
  for (const auto& [name, t] : watched.entries()) grads.push_back(tape.grad(t));
  adam_step(params, grads, state);
  return result;
}

std::string format_log_row(const TrainLogRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g", row.epoch, row.scene, row.total,
                row.cls, row.box);
  return buf;
}

std::vector<TrainLogRow> train(const data::Dataset& dataset, model::ModelParams& params,
                               const model::ModelConfig& config, const TrainSettings& settings,
                               const std::function<void(const TrainLogRow&)>& on_row) {
  if (dataset.scenes.empty()) throw ContractError("train: dataset is empty");
  OptimizerState state = make_optimizer(params, settings.adam);
  Rng order_rng(config.seed ^ 0x5EEDull);
  std::vector<std::size_t> order(dataset.scenes.size());
  std::vector<TrainLogRow> log;
  for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[order_rng.uniform_int(0, i - 1)]);
    for (std::size_t idx : order) {
      LossBreakdown step;
      try {
        step = train_step(dataset.scenes[idx], params, state, config, settings.loss);
      } catch (const NumericError& e) {
        throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                  ", scene " + std::to_string(idx),
                              epoch, idx);
      }
      const TrainLogRow row{epoch, idx, step.total, step.cls, step.box};
      log.push_back(row);
      if (on_row) on_row(row);
    }
  }
  return log;
}

}  // namespace reldet::training
