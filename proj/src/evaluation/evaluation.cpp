#include "reldet/evaluation/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <tuple>

#include <json.hpp>

#include "reldet/errors.hpp"

namespace reldet::evaluation {

std::vector<ScoredDetection> extract_detections(const model::DetectionOutput& out,
                                                double conf_floor) {
  std::vector<ScoredDetection> dets;
  for (const auto& p : out.predictions) {
    const auto best = std::max_element(p.class_probs.begin(), p.class_probs.end());
    const auto cls = static_cast<std::size_t>(best - p.class_probs.begin());
    if (cls == p.null_class() || *best < conf_floor) continue;
    dets.push_back({cls, *best, p.box});
  }
  return dets;
}

namespace {

std::vector<std::size_t> confidence_order(std::span<const ScoredDetection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  return order;
}

}  // namespace

std::vector<bool> match_detections(std::span<const ScoredDetection> detections,
                                   std::span<const matching::GroundTruth> ground_truth,
                                   double iou_threshold) {
  std::vector<bool> flags(detections.size(), false);
  std::vector<bool> used(ground_truth.size(), false);
  for (std::size_t d : confidence_order(detections)) {
    double best_iou = -1.0;
    std::size_t best = ground_truth.size();
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (used[g] || ground_truth[g].class_id != detections[d].class_id) continue;
      const double overlap = geometry::iou(detections[d].box, ground_truth[g].box);
      if (overlap >= iou_threshold && overlap > best_iou) {
        best_iou = overlap;
        best = g;
      }
    }
    if (best < ground_truth.size()) {
      used[best] = true;
      flags[d] = true;
    }
  }
  return flags;
}

std::optional<double> average_precision(const std::vector<bool>& flags, std::size_t num_gt) {
  if (num_gt == 0) return std::nullopt;
  // Precision at each detection, then the running maximum from the right
  // gives the interpolated precision at that recall or any higher one.
  std::vector<long double> precision(flags.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    tp += flags[i] ? 1 : 0;
    precision[i] = static_cast<long double>(tp) / static_cast<long double>(i + 1);
  }
  for (std::size_t i = flags.size(); i-- > 1;)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  // Extended accumulation, one rounding at the end.
  long double total = 0.0L;
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (flags[i]) total += precision[i];
  return static_cast<double>(total / static_cast<long double>(num_gt));
}

APReport evaluate_detections(std::span<const std::vector<ScoredDetection>> detections,
                             std::span<const std::vector<matching::GroundTruth>> ground_truth,
                             const data::ClassCatalog& catalog, double iou_threshold) {
  if (detections.size() != ground_truth.size())
    throw DimensionError("evaluate: " + std::to_string(detections.size()) +
                         " detection lists for " + std::to_string(ground_truth.size()) + " scenes");
  const std::size_t k = catalog.size();
  // (confidence, scene, index, tp) pooled per class.
  using Pooled = std::tuple<double, std::size_t, std::size_t, bool>;
  std::vector<std::vector<Pooled>> pooled(k);
  APReport report;
  report.iou_threshold = iou_threshold;
  report.classes.resize(k);
  for (std::size_t c = 0; c < k; ++c) report.classes[c].name = catalog.names[c];

  for (std::size_t s = 0; s < detections.size(); ++s) {
    for (const auto& gt : ground_truth[s])
      if (gt.class_id < k) report.classes[gt.class_id].gt += 1;
    const std::vector<bool> flags = match_detections(detections[s], ground_truth[s], iou_threshold);
    for (std::size_t d = 0; d < detections[s].size(); ++d) {
      const auto& det = detections[s][d];
      if (det.class_id >= k) throw ContractError("detection class id outside the catalog");
      pooled[det.class_id].emplace_back(det.confidence, s, d, flags[d]);
    }
  }

  double ap_sum = 0.0;
  std::size_t ap_count = 0;
  for (std::size_t c = 0; c < k; ++c) {
    auto& list = pooled[c];
    std::stable_sort(list.begin(), list.end(), [](const Pooled& a, const Pooled& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
      return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
    });
    std::vector<bool> flags;
    for (const auto& p : list) {
      flags.push_back(std::get<3>(p));
      (std::get<3>(p) ? report.classes[c].tp : report.classes[c].fp) += 1;
    }
    report.classes[c].ap = average_precision(flags, report.classes[c].gt);
    if (report.classes[c].ap) {
      ap_sum += *report.classes[c].ap;
      ++ap_count;
    }
  }
  report.mean_ap = ap_count ? ap_sum / static_cast<double>(ap_count) : 0.0;
  return report;
}

APReport evaluate_dataset(const data::Dataset& dataset, const model::ModelParams& params,
                          const model::ModelConfig& config, double iou_threshold) {
  if (dataset.scenes.empty()) throw ContractError("evaluate_dataset: dataset is empty");
  std::vector<std::vector<ScoredDetection>> dets;
  std::vector<std::vector<matching::GroundTruth>> gts;
  for (const auto& scene : dataset.scenes) {
    dets.push_back(extract_detections(model::forward(scene.image, params, config).detections()));
    gts.push_back(scene.objects);
  }
  return evaluate_detections(dets, gts, dataset.catalog, iou_threshold);
}

std::string format_report(const APReport& report) {
  std::size_t width = 5;
  for (const auto& c : report.classes) width = std::max(width, c.name.size());
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %8s  %6s  %6s  %6s\n", static_cast<int>(width), "class",
                "AP", "TP", "FP", "GT");
  out += line;
  for (const auto& c : report.classes) {
    char ap[32];
    if (c.ap)
      std::snprintf(ap, sizeof ap, "%8.4f", *c.ap);
    else
      std::snprintf(ap, sizeof ap, "%8s", "n/a");
    std::snprintf(line, sizeof line, "%-*s  %s  %6zu  %6zu  %6zu\n", static_cast<int>(width),
                  c.name.c_str(), ap, c.tp, c.fp, c.gt);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-*s  %8.4f  (IoU >= %.2f)\n", static_cast<int>(width), "mAP",
                report.mean_ap, report.iou_threshold);
  out += line;
  return out;
}

std::string report_json(const APReport& report) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : report.classes) {
    classes.push_back({{"name", c.name},
                       {"ap", c.ap ? nlohmann::json(*c.ap) : nlohmann::json(nullptr)},
                       {"tp", c.tp},
                       {"fp", c.fp},
                       {"gt", c.gt}});
  }
  return nlohmann::json{{"iou_threshold", report.iou_threshold},
                        {"classes", std::move(classes)},
                        {"mean_ap", report.mean_ap}}
             .dump(2) +
         "\n";
}

}  // namespace reldet::evaluation
