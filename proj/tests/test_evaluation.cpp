#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "reldet/evaluation/evaluation.hpp"
#include "reldet/random.hpp"
#include "support.hpp"

using namespace reldet;
using namespace reldet::evaluation;
using geometry::Box;
using matching::GroundTruth;

namespace {

model::DetectionOutput output_of(std::vector<std::vector<double>> probs) {
  model::DetectionOutput out;
  for (auto& p : probs) out.predictions.push_back({std::move(p), {0.5, 0.5, 0.2, 0.2}});
  return out;
}

Box jitter(const Box& b, Rng& rng, double amount) {
  return {b.cx + rng.uniform(-amount, amount), b.cy + rng.uniform(-amount, amount), b.w, b.h};
}

}  // namespace

TEST_CASE("extract_detections") {
  CHECK(extract_detections(output_of({{0.1, 0.1, 0.8}, {0.2, 0.2, 0.6}})).empty());
  const auto tie = extract_detections(output_of({{1.0 / 3, 1.0 / 3, 1.0 / 3}}));
  REQUIRE(tie.size() == 1);
  CHECK(tie[0].class_id == 0);
  const auto d = extract_detections(output_of({{0.1, 0.7, 0.2}}));
  REQUIRE(d.size() == 1);
  CHECK(d[0].class_id == 1);
  CHECK(d[0].confidence == 0.7);
  CHECK(extract_detections(output_of({{0.1, 0.7, 0.2}}), 0.75).empty());
}

TEST_CASE("match_detections") {
  const std::vector<GroundTruth> gt = {{0, {0.3, 0.3, 0.2, 0.2}}, {1, {0.7, 0.7, 0.2, 0.2}}};
  const std::vector<ScoredDetection> exact = {{1, 0.9, gt[1].box}, {0, 0.8, gt[0].box}};
  CHECK(match_detections(exact, gt, 0.5) == std::vector<bool>{true, true});

  const std::vector<ScoredDetection> twice = {{0, 0.6, gt[0].box}, {0, 0.9, gt[0].box}};
  CHECK(match_detections(twice, gt, 0.5) == std::vector<bool>{false, true});

  // Corners (0,0,2,2) and (1,0,3,2) overlap with IoU 1/3.
  const std::vector<GroundTruth> wide = {{0, geometry::from_corners({0, 0, 2, 2})}};
  const std::vector<ScoredDetection> shifted = {{0, 0.9, geometry::from_corners({1, 0, 3, 2})}};
  CHECK(match_detections(shifted, wide, 0.5) == std::vector<bool>{false});
  CHECK(match_detections(shifted, wide, 0.3) == std::vector<bool>{true});

  const std::vector<ScoredDetection> wrong_class = {{1, 0.9, gt[0].box}};
  CHECK(match_detections(wrong_class, gt, 0.5) == std::vector<bool>{false});
}

TEST_CASE("IoU 0.4 pair is a false positive at 0.5") {
  // Corners (0,0,1,1) vs (0,0,1,0.4): IoU 0.4.
  const std::vector<GroundTruth> gt = {{0, geometry::from_corners({0, 0, 1, 1})}};
  const std::vector<ScoredDetection> det = {{0, 0.9, geometry::from_corners({0, 0, 1, 0.4})}};
  CHECK(geometry::iou(gt[0].box, det[0].box) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(match_detections(det, gt, 0.5) == std::vector<bool>{false});
}

TEST_CASE("average_precision") {
  CHECK(average_precision({true}, 1) == 1.0);
  CHECK(average_precision({}, 2) == 0.0);
  CHECK(*average_precision({true, false, true}, 2) == 5.0 / 6.0);
  CHECK_FALSE(average_precision({false}, 0).has_value());
  CHECK(*average_precision({false, true}, 1) == 0.5);
}

TEST_CASE("average_precision matches the brute-force PR table") {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = rng.uniform_int(0, 20);
    const std::size_t gt = rng.uniform_int(1, 12);
    std::vector<bool> flags(n);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      flags[i] = tp < gt && rng.uniform() < 0.5;
      tp += flags[i];
    }
    const double ap = *average_precision(flags, gt);
    CHECK(std::abs(ap - test::brute_force_ap(flags, gt)) <= 1e-12);
    CHECK(ap >= 0.0);
    CHECK(ap <= 1.0);
    bool prefix_all_tp = tp == gt;
    for (std::size_t i = 0; i < n && prefix_all_tp; ++i) {
      if (!flags[i]) {
        std::size_t later = 0;
        for (std::size_t j = i; j < n; ++j) later += flags[j];
        prefix_all_tp = later == 0;
        break;
      }
    }
    CHECK((ap == 1.0) == prefix_all_tp);
  }
}

TEST_CASE("perfect and empty detectors") {
  Rng rng(2);
  const auto catalog = data::ClassCatalog::defaults();
  std::vector<std::vector<GroundTruth>> gts(4);
  std::vector<std::vector<ScoredDetection>> echoed(4), none(4);
  for (auto& scene : gts)
    for (int i = 0; i < 3; ++i)
      scene.push_back({rng.uniform_int(0, 4),
                       {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.1, 0.3),
                        rng.uniform(0.1, 0.3)}});
  for (std::size_t s = 0; s < 4; ++s)
    for (const auto& g : gts[s]) echoed[s].push_back({g.class_id, 1.0, g.box});
  const auto perfect = evaluate_detections(echoed, gts, catalog, 0.5);
  for (const auto& c : perfect.classes)
    if (c.gt > 0) CHECK(c.ap == 1.0);
  CHECK(perfect.mean_ap == 1.0);
  CHECK(evaluate_detections(none, gts, catalog, 0.5).mean_ap == 0.0);
}

TEST_CASE("hand-built two-scene fixture") {
  const data::ClassCatalog catalog{{"a", "b"}};
  const Box g1{0.3, 0.3, 0.2, 0.2}, g2{0.7, 0.7, 0.2, 0.2}, g3{0.5, 0.5, 0.3, 0.3};
  const std::vector<std::vector<GroundTruth>> gts = {{{0, g1}, {1, g3}}, {{0, g2}}};
  // Class a pooled by confidence: 0.9 TP (scene 0), 0.8 FP (scene 1), 0.7 TP (scene 1).
  // Class b: 0.6 FP (wrong place) only.
  const std::vector<std::vector<ScoredDetection>> dets = {
      {{0, 0.9, g1}, {1, 0.6, {0.1, 0.9, 0.1, 0.1}}},
      {{0, 0.8, {0.1, 0.1, 0.1, 0.1}}, {0, 0.7, g2}}};
  const auto r = evaluate_detections(dets, gts, catalog, 0.5);
  REQUIRE(r.classes.size() == 2);
  CHECK(r.classes[0].tp == 2);
  CHECK(r.classes[0].fp == 1);
  CHECK(r.classes[0].gt == 2);
  CHECK(*r.classes[0].ap == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(*r.classes[1].ap == 0.0);
  CHECK(r.mean_ap == doctest::Approx(5.0 / 12.0).epsilon(1e-15));
  CHECK(r.iou_threshold == 0.5);
}

TEST_CASE("classes without ground truth are excluded from the mean") {
  const data::ClassCatalog catalog{{"a", "b"}};
  const std::vector<std::vector<GroundTruth>> gts = {{{0, {0.5, 0.5, 0.2, 0.2}}}};
  const std::vector<std::vector<ScoredDetection>> dets = {
      {{0, 0.9, {0.5, 0.5, 0.2, 0.2}}, {1, 0.8, {0.2, 0.2, 0.1, 0.1}}}};
  const auto r = evaluate_detections(dets, gts, catalog, 0.5);
  CHECK_FALSE(r.classes[1].ap.has_value());
  CHECK(r.classes[1].fp == 1);
  CHECK(r.mean_ap == 1.0);
}

TEST_CASE("AP is invariant under monotone confidence rescaling") {
  Rng rng(3);
  const auto catalog = data::ClassCatalog::defaults();
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<GroundTruth>> gts(3);
    std::vector<std::vector<ScoredDetection>> dets(3), rescaled(3);
    for (std::size_t s = 0; s < 3; ++s) {
      for (int i = 0; i < 3; ++i)
        gts[s].push_back({rng.uniform_int(0, 4),
                          {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.1, 0.3),
                           rng.uniform(0.1, 0.3)}});
      for (const auto& g : gts[s])
        if (rng.uniform() < 0.8)
          dets[s].push_back({rng.uniform() < 0.8 ? g.class_id : rng.uniform_int(0, 4),
                             rng.uniform(0.05, 1.0), jitter(g.box, rng, 0.08)});
      for (int i = 0; i < 2; ++i)
        dets[s].push_back({rng.uniform_int(0, 4), rng.uniform(0.05, 1.0),
                           {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), 0.2, 0.2}});
      for (const auto& d : dets[s])
        rescaled[s].push_back({d.class_id, 0.5 * d.confidence * d.confidence * d.confidence + 0.01, d.box});
    }
    const auto a = evaluate_detections(dets, gts, catalog, 0.5);
    const auto b = evaluate_detections(rescaled, gts, catalog, 0.5);
    CHECK(a.mean_ap == b.mean_ap);
    for (std::size_t c = 0; c < a.classes.size(); ++c) {
      CHECK(a.classes[c].ap == b.classes[c].ap);
      CHECK(a.classes[c].tp <= std::min(a.classes[c].tp + a.classes[c].fp, a.classes[c].gt));
    }
    const auto strict = evaluate_detections(dets, gts, catalog, 0.99);
    CHECK(strict.mean_ap <= a.mean_ap);
  }
}

TEST_CASE("report formats") {
  const data::ClassCatalog catalog{{"a", "b"}};
  const std::vector<std::vector<GroundTruth>> gts = {{{0, {0.5, 0.5, 0.2, 0.2}}}};
  const std::vector<std::vector<ScoredDetection>> dets = {{{0, 0.9, {0.5, 0.5, 0.2, 0.2}}}};
  const auto r = evaluate_detections(dets, gts, catalog, 0.5);
  const std::string table = format_report(r);
  CHECK(table.find("mAP") != std::string::npos);
  CHECK(table.find("n/a") != std::string::npos);
  const auto doc = nlohmann::json::parse(report_json(r));
  CHECK(doc["iou_threshold"] == 0.5);
  CHECK(doc["mean_ap"] == 1.0);
  REQUIRE(doc["classes"].size() == 2);
  CHECK(doc["classes"][0]["name"] == "a");
  CHECK(doc["classes"][0]["ap"] == 1.0);
  CHECK(doc["classes"][1]["ap"].is_null());
  CHECK(doc["classes"][0]["tp"] == 1);
}
