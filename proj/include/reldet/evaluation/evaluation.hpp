#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reldet/data/dataset.hpp"
#include "reldet/model/model.hpp"

namespace reldet::evaluation {

inline constexpr double kDefaultIouThreshold = 0.5;

struct ScoredDetection {
  std::size_t class_id = 0;
  double confidence = 0.0;
  geometry::Box box;
};

/// Argmax over all K+1 classes per query (ties to the lowest index); queries
/// whose argmax is the null class or whose confidence is below `conf_floor`
/// are dropped.
std::vector<ScoredDetection> extract_detections(const model::DetectionOutput& out,
                                                double conf_floor = 0.0);

/// Greedy matching in descending confidence (ties by input index). Each
/// detection takes the highest-IoU unused ground truth of its class with
/// IoU ≥ threshold. Returned flags (true = TP) follow the input order.
std::vector<bool> match_detections(std::span<const ScoredDetection> detections,
                                   std::span<const matching::GroundTruth> ground_truth,
                                   double iou_threshold);

/// All-point interpolated AP for TP/FP flags already in descending confidence
/// order. nullopt when num_gt == 0.
std::optional<double> average_precision(const std::vector<bool>& flags, std::size_t num_gt);

struct ClassReport {
  std::string name;
  std::optional<double> ap;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t gt = 0;
};

struct APReport {
  double iou_threshold = kDefaultIouThreshold;
  std::vector<ClassReport> classes;
  /// Mean over classes with at least one ground truth (0 if there are none).
  double mean_ap = 0.0;
};

/// Pools per-scene detections by class across scenes and scores them.
APReport evaluate_detections(std::span<const std::vector<ScoredDetection>> detections,
                             std::span<const std::vector<matching::GroundTruth>> ground_truth,
                             const data::ClassCatalog& catalog, double iou_threshold);

APReport evaluate_dataset(const data::Dataset& dataset, const model::ModelParams& params,
                          const model::ModelConfig& config,
                          double iou_threshold = kDefaultIouThreshold);

/// Aligned text table: class, AP, TP, FP, GT, then a mAP row.
std::string format_report(const APReport& report);
std::string report_json(const APReport& report);

}  // namespace reldet::evaluation
