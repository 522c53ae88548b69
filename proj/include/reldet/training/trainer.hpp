#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "reldet/data/dataset.hpp"
#include "reldet/errors.hpp"
#include "reldet/matching/matching.hpp"
#include "reldet/model/model.hpp"
#include "reldet/training/adam.hpp"

namespace reldet::training {

struct LossSettings {
  geometry::LossWeights weights;
  double null_weight = matching::kDefaultNullWeight;
};

struct SceneLoss {
  matching::LossTerms terms;
  matching::Assignment assignment;
  std::vector<matching::GroundTruth> targets;  // padded to num_queries
};

/// Forward pass, padding, optimal assignment on the detached predictions, and
/// the Hungarian loss on whatever tape `params` live on. With `fixed` set, that
/// assignment is used instead of solving for one.
SceneLoss scene_loss(const data::Scene& scene, const model::ModelParams& params,
                     const model::ModelConfig& config, const LossSettings& loss,
                     const matching::Assignment* fixed = nullptr);

struct LossBreakdown {
  double total = 0.0;
  double cls = 0.0;
  double box = 0.0;
};

/// One optimization step on one scene. Throws NumericError on a non-finite
/// loss or gradient, before touching the parameters.
LossBreakdown train_step(const data::Scene& scene, model::ModelParams& params,
                         OptimizerState& state, const model::ModelConfig& config,
                         const LossSettings& loss);

struct TrainLogRow {
  std::size_t epoch = 0;
  std::size_t scene = 0;
  double total = 0.0;
  double cls = 0.0;
  double box = 0.0;
};

inline constexpr const char* kLogHeader = "epoch,scene,total,cls,box";
std::string format_log_row(const TrainLogRow& row);

struct TrainSettings {
  std::size_t epochs = 1;
  LossSettings loss;
  AdamSettings adam;
};

/// Plain epochs over the dataset, visiting scenes in a per-epoch order
/// shuffled from config.seed. Errors carry the failing epoch and scene.
std::vector<TrainLogRow> train(const data::Dataset& dataset, model::ModelParams& params,
                               const model::ModelConfig& config, const TrainSettings& settings,
                               const std::function<void(const TrainLogRow&)>& on_row = {});

/// A non-finite loss or gradient during `train`, with its location.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::size_t epoch, std::size_t scene)
      : NumericError(what), epoch_(epoch), scene_(scene) {}
  std::size_t epoch() const { return epoch_; }
  std::size_t scene() const { return scene_; }

 private:
  std::size_t epoch_;
  std::size_t scene_;
};

}  // namespace reldet::training
