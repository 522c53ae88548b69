#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "reldet/errors.hpp"
#include "reldet/matching/matching.hpp"
#include "reldet/numeric/gradcheck.hpp"
#include "reldet/numeric/ops.hpp"
#include "reldet/random.hpp"
#include "support.hpp"

using namespace reldet;
using namespace reldet::matching;
using geometry::Box;
using geometry::LossWeights;

namespace {

CostMatrix random_matrix(std::size_t n, Rng& rng, bool integral) {
  std::vector<double> v(n * n);
  for (double& x : v) x = integral ? static_cast<double>(rng.uniform_int(0, 5)) : rng.uniform(-2, 2);
  return CostMatrix(n, n, std::move(v));
}

Prediction random_prediction(std::size_t classes, Rng& rng) {
  Prediction p;
  double total = 0;
  for (std::size_t c = 0; c <= classes; ++c) p.class_probs.push_back(rng.uniform(0.01, 1.0));
  for (double v : p.class_probs) total += v;
  for (double& v : p.class_probs) v /= total;
  p.box = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.05, 0.4),
           rng.uniform(0.05, 0.4)};
  return p;
}

}  // namespace

TEST_CASE("pad_targets") {
  const std::vector<GroundTruth> two = {{0, {0.5, 0.5, 0.2, 0.2}}, {1, {0.3, 0.3, 0.1, 0.1}}};
  const auto padded = pad_targets(two, 4, 5);
  REQUIRE(padded.size() == 4);
  CHECK(padded[0].class_id == 0);
  CHECK(padded[1].class_id == 1);
  CHECK(padded[2].class_id == 5);
  CHECK(padded[3].box == Box{});
  const auto empty = pad_targets({}, 3, 5);
  CHECK(empty.size() == 3);
  CHECK(std::all_of(empty.begin(), empty.end(), [](const GroundTruth& g) { return g.class_id == 5; }));
  CHECK(pad_targets(two, 2, 5).size() == 2);
  CHECK_THROWS_AS(pad_targets(two, 1, 5), CapacityError);
}

TEST_CASE("match_cost") {
  Prediction p{{0.5, 0.3, 0.2}, {0.75, 0.75, 0.5, 0.5}};
  CHECK(match_cost({2, {}}, p, LossWeights{}) == 0.0);
  Prediction perfect{{1.0, 0.0, 0.0}, {0.25, 0.25, 0.5, 0.5}};
  CHECK(match_cost({0, {0.25, 0.25, 0.5, 0.5}}, perfect, LossWeights{}) == -1.0);
  CHECK(match_cost({0, {0.25, 0.25, 0.5, 0.5}}, p, {1, 1}) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("null targets cost nothing against any prediction") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) CHECK(match_cost({4, {}}, random_prediction(4, rng), LossWeights{}) == 0.0);
}

TEST_CASE("build_cost_matrix") {
  Rng rng(4);
  std::vector<Prediction> preds = {random_prediction(2, rng), random_prediction(2, rng)};
  const auto nulls = pad_targets({}, 2, 2);
  const CostMatrix z = build_cost_matrix(nulls, preds, LossWeights{});
  CHECK(z(0, 0) == 0.0);
  CHECK(z(1, 1) == 0.0);

  const std::vector<GroundTruth> one = {{1, {0.4, 0.4, 0.2, 0.3}}};
  const CostMatrix single = build_cost_matrix(one, std::span(preds).first(1), LossWeights{});
  CHECK(single(0, 0) == match_cost(one[0], preds[0], LossWeights{}));

  const auto mixed = pad_targets(one, 2, 2);
  const CostMatrix c = build_cost_matrix(mixed, preds, LossWeights{});
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(c(i, j) == match_cost(mixed[i], preds[j], LossWeights{}));
  CHECK_THROWS_AS(build_cost_matrix(mixed, std::span(preds).first(1), LossWeights{}), DimensionError);
}

TEST_CASE("hungarian small cases") {
  CHECK(hungarian(CostMatrix::zeros(3)).total_cost == 0.0);
  const auto a = hungarian(CostMatrix(2, 2, {1, 2, 3, 1}));
  CHECK(a.perm == std::vector<std::size_t>{0, 1});
  CHECK(a.total_cost == 2.0);
  const auto b = hungarian(CostMatrix(2, 2, {4, 1, 2, 3}));
  CHECK(b.perm == std::vector<std::size_t>{1, 0});
  CHECK(b.total_cost == 3.0);
  CHECK_THROWS_AS(hungarian(CostMatrix(2, 3, std::vector<double>(6))), ContractError);
  CHECK_THROWS_AS(hungarian(CostMatrix(1, 1, {NAN})), ContractError);
}

TEST_CASE("brute force small cases") {
  const auto one = brute_force_assign(CostMatrix(1, 1, {7}));
  CHECK(one.perm == std::vector<std::size_t>{0});
  CHECK(one.total_cost == 7.0);
  // Unique row minima in distinct columns.
  const auto d = brute_force_assign(CostMatrix(3, 3, {5, 0, 5, 5, 5, 0, 0, 5, 5}));
  CHECK(d.perm == std::vector<std::size_t>{1, 2, 0});
  CHECK_THROWS_AS(brute_force_assign(CostMatrix::zeros(10)), CapacityError);
}

TEST_CASE("hungarian equals brute force in cost") {
  Rng rng(5);
  for (std::size_t n = 1; n <= 7; ++n)
    for (int trial = 0; trial < 200; ++trial) {
      const CostMatrix c = random_matrix(n, rng, trial % 2 == 0);
      const auto h = hungarian(c);
      CHECK(h.total_cost == brute_force_assign(c).total_cost);
      CHECK(h.total_cost == assignment_cost(c, h.perm));
      auto sorted = h.perm;
      std::sort(sorted.begin(), sorted.end());
      std::vector<std::size_t> iota(n);
      std::iota(iota.begin(), iota.end(), 0);
      CHECK(sorted == iota);
    }
}

TEST_CASE("hungarian beats random permutations") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = rng.uniform_int(2, 12);
    const CostMatrix c = random_matrix(n, rng, false);
    const double best = hungarian(c).total_cost;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int k = 0; k < 100; ++k) {
      for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
      CHECK(best <= assignment_cost(c, perm) + 1e-12);
    }
  }
}

TEST_CASE("row offsets shift the optimum by the offset") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = rng.uniform_int(2, 7);
    CostMatrix c = random_matrix(n, rng, true);
    const auto before = hungarian(c);
    const std::size_t row = rng.uniform_int(0, n - 1);
    const double offset = static_cast<double>(rng.uniform_int(-3, 3));
    for (std::size_t j = 0; j < n; ++j) c(row, j) += offset;
    const auto after = hungarian(c);
    CHECK(after.total_cost == before.total_cost + offset);
    CHECK(assignment_cost(c, before.perm) == after.total_cost);
  }
}

TEST_CASE("hungarian_loss values") {
  using numeric::Tensor;
  const std::vector<GroundTruth> targets = {{0, {0.3, 0.3, 0.2, 0.2}}, {1, {}}};
  const Tensor perfect_probs = Tensor::matrix({{1, 0}, {0, 1}});
  const Tensor boxes = Tensor::matrix({{0.3, 0.3, 0.2, 0.2}, {0.5, 0.5, 0.1, 0.1}});
  const Assignment identity{{0, 1}, 0.0};
  CHECK(hungarian_loss(targets, perfect_probs, boxes, identity, LossWeights{}, 1.0).total.item() == 0.0);

  const std::vector<GroundTruth> null_slot = {{1, {}}};
  const auto half = hungarian_loss(null_slot, Tensor::matrix({{0.5, 0.5}}),
                                   Tensor::matrix({{0.5, 0.5, 0.2, 0.2}}), {{0}, 0.0}, LossWeights{}, 1.0);
  CHECK(half.total.item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(half.box.item() == 0.0);
  const auto muted = hungarian_loss(null_slot, Tensor::matrix({{0.5, 0.5}}),
                                    Tensor::matrix({{0.5, 0.5, 0.2, 0.2}}), {{0}, 0.0}, LossWeights{}, 0.0);
  CHECK(muted.total.item() == 0.0);
}

TEST_CASE("hungarian_loss follows the assignment") {
  using numeric::Tensor;
  const std::vector<GroundTruth> targets = {{0, {0.3, 0.3, 0.2, 0.2}}, {1, {}}};
  const Tensor probs = Tensor::matrix({{0.1, 0.9}, {0.8, 0.2}});
  const Tensor boxes = Tensor::matrix({{0.5, 0.5, 0.1, 0.1}, {0.3, 0.3, 0.2, 0.2}});
  const auto swapped = hungarian_loss(targets, probs, boxes, {{1, 0}, 0.0}, LossWeights{}, 0.1);
  CHECK(swapped.box.item() == 0.0);
  CHECK(swapped.classification.item() ==
        doctest::Approx(-std::log(0.8) - 0.1 * std::log(0.9)).epsilon(1e-14));
}

TEST_CASE("hungarian_loss gradient with the assignment held fixed") {
  Rng rng(8);
  const std::vector<GroundTruth> gt = {{0, {0.3, 0.4, 0.2, 0.3}}, {2, {0.7, 0.6, 0.3, 0.2}}};
  const auto targets = pad_targets(gt, 4, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto logits = test::random_tensor({4, 4}, rng, -2, 2);
    const auto raw = test::random_tensor({4, 4}, rng);
    const Assignment a{{3, 1, 0, 2}, 0.0};
    const auto via_logits = numeric::check_gradient(
        [&](const numeric::Tensor& x) {
          return hungarian_loss(targets, numeric::softmax(x, 1), numeric::sigmoid(raw), a,
                                LossWeights{}, 0.1)
              .total;
        },
        logits);
    CHECK(via_logits.max_rel_error <= 1e-4);
    const auto via_boxes = numeric::check_gradient(
        [&](const numeric::Tensor& x) {
          return hungarian_loss(targets, numeric::softmax(logits, 1), numeric::sigmoid(x), a,
                                LossWeights{}, 0.1)
              .total;
        },
        raw);
    CHECK(via_boxes.max_rel_error <= 1e-4);
  }
}
