#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include <json.hpp>

#include "reldet/data/dataset.hpp"
#include "reldet/data/image_io.hpp"
#include "reldet/errors.hpp"
#include "reldet/training/adam.hpp"
#include "reldet/training/checkpoint.hpp"
#include "reldet/training/trainer.hpp"
#include "support.hpp"

using namespace reldet;
using namespace reldet::training;
namespace fs = std::filesystem;
namespace nm = reldet::numeric;

namespace {

model::ModelConfig small_config() {
  model::ModelConfig c;
  c.image_height = c.image_width = 16;
  c.backbone_channels = 4;
  c.model_dim = 8;
  c.num_heads = 2;
  c.ffn_dim = 16;
  c.num_queries = 5;
  c.num_classes = 5;
  return c;
}

data::Dataset small_dataset(std::size_t count) {
  data::SceneConfig sc;
  sc.image_size = 16;
  sc.max_objects = 3;
  return data::generate_dataset(2, count, sc);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("reldet_test_training_" + name);
  fs::remove_all(dir);
  return dir;
}

model::ModelParams single(const std::string& name, nm::Tensor t) {
  model::ModelParams p;
  p.add(name, std::move(t));
  return p;
}

}  // namespace

TEST_CASE("adam with zero gradients leaves parameters alone") {
  auto p = single("x", nm::Tensor::vector({1, -2, 3}));
  auto state = make_optimizer(p);
  const std::vector<nm::Tensor> grads = {nm::Tensor::zeros({3})};
  adam_step(p, grads, state);
  CHECK(test::values(p.get("x")) == std::vector<double>{1, -2, 3});
  CHECK(state.step == 1);
}

TEST_CASE("first adam step moves by about lr against the gradient sign") {
  auto p = single("x", nm::Tensor::vector({0.5, 0.5, 0.5}));
  auto state = make_optimizer(p);
  const std::vector<nm::Tensor> grads = {nm::Tensor::vector({3.0, -0.01, 100.0})};
  adam_step(p, grads, state);
  CHECK(p.get("x")[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
  CHECK(p.get("x")[1] == doctest::Approx(0.5 + 1e-3).epsilon(1e-6));
  CHECK(p.get("x")[2] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
}

TEST_CASE("adam descends a convex quadratic monotonically") {
  auto p = single("x", nm::Tensor::scalar(1.0));
  auto state = make_optimizer(p, {0.01, 0.9, 0.999, 1e-8});
  double prev = 1.0;
  for (int i = 0; i < 100; ++i) {
    const std::vector<nm::Tensor> grads = {nm::Tensor::scalar(2.0 * p.get("x").item())};
    adam_step(p, grads, state);
    const double now = std::abs(p.get("x").item());
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("adam rejects non-finite gradients by name") {
  auto p = single("layer.weight", nm::Tensor::vector({1, 2}));
  auto state = make_optimizer(p);
  const std::vector<nm::Tensor> grads = {
      nm::Tensor::vector({0.1, std::numeric_limits<double>::quiet_NaN()})};
  try {
    adam_step(p, grads, state);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("layer.weight") != std::string::npos);
  }
  CHECK(test::values(p.get("layer.weight")) == std::vector<double>{1, 2});
  CHECK(state.step == 0);
}

TEST_CASE("train_step on a fresh model") {
  const auto c = small_config();
  const auto d = small_dataset(1);
  auto params = model::init_params(c, 1);
  auto state = make_optimizer(params);
  const auto step = train_step(d.scenes[0], params, state, c, {});
  CHECK(std::isfinite(step.total));
  CHECK(step.total == doctest::Approx(step.cls + step.box).epsilon(1e-12));
  CHECK(state.step == 1);
}

TEST_CASE("zero box weights leave only the classification term") {
  const auto c = small_config();
  const auto d = small_dataset(1);
  const auto params = model::init_params(c, 1);
  LossSettings loss;
  loss.weights = {0.0, 0.0};
  loss.null_weight = 0.5;
  const auto sl = scene_loss(d.scenes[0], params, c, loss);
  CHECK(sl.terms.box.item() == 0.0);
  CHECK(sl.terms.total.item() == sl.terms.classification.item());
}

TEST_CASE("overfitting one scene reduces the loss") {
  const auto c = small_config();
  const auto d = small_dataset(1);
  auto params = model::init_params(c, 2);
  auto state = make_optimizer(params);
  const double first = train_step(d.scenes[0], params, state, c, {}).total;
  double last = first;
  for (int i = 0; i < 200; ++i) last = train_step(d.scenes[0], params, state, c, {}).total;
  CHECK(last < first);
}

TEST_CASE("training is deterministic") {
  const auto c = small_config();
  const auto d = small_dataset(3);
  TrainSettings s;
  s.epochs = 3;
  auto p1 = model::init_params(c, 3), p2 = model::init_params(c, 3);
  const auto l1 = train(d, p1, c, s), l2 = train(d, p2, c, s);
  REQUIRE(l1.size() == 9);
  for (std::size_t i = 0; i < l1.size(); ++i) CHECK(format_log_row(l1[i]) == format_log_row(l2[i]));
  for (std::size_t i = 0; i < p1.size(); ++i)
    CHECK(test::values(p1.entries()[i].second) == test::values(p2.entries()[i].second));
}

TEST_CASE("each epoch visits every scene once") {
  const auto c = small_config();
  const auto d = small_dataset(4);
  TrainSettings s;
  s.epochs = 2;
  auto p = model::init_params(c, 4);
  const auto log = train(d, p, c, s);
  for (std::size_t e = 0; e < 2; ++e) {
    std::vector<std::size_t> seen;
    for (const auto& row : log)
      if (row.epoch == e) seen.push_back(row.scene);
    std::sort(seen.begin(), seen.end());
    CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3});
  }
}

TEST_CASE("divergence names the epoch and scene") {
  const auto c = small_config();
  const auto d = small_dataset(2);
  auto p = model::init_params(c, 5);
  p.get("head.box.3.bias").mutable_data()[0] = std::numeric_limits<double>::infinity();
  p.get("head.class.bias").mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
  TrainSettings s;
  try {
    train(d, p, c, s);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() == 0);
    CHECK(e.scene() < 2);
  }
}

TEST_CASE("log rows") {
  CHECK(std::string(kLogHeader) == "epoch,scene,total,cls,box");
  CHECK(format_log_row({2, 7, 0.1, 0.25, 1.0 / 3.0}) == "2,7,0.10000000000000001,0.25,0.33333333333333331");
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto c = small_config();
  const auto params = model::init_params(c, 6);
  const fs::path dir = scratch_dir("roundtrip");
  const std::vector<std::string> names = data::ClassCatalog::defaults().names;
  save_checkpoint(dir, params, c, names);
  const Checkpoint back = load_checkpoint(dir);
  CHECK(back.config == c);
  CHECK(back.class_names == names);
  REQUIRE(back.params.size() == params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(back.params.entries()[i].first == params.entries()[i].first);
    CHECK(test::values(back.params.entries()[i].second) == test::values(params.entries()[i].second));
  }
  const auto scene = small_dataset(1).scenes[0];
  const auto a = model::forward(scene.image, params, c);
  const auto b = model::forward(scene.image, back.params, back.config);
  CHECK(test::values(a.heads.probs) == test::values(b.heads.probs));
  CHECK(test::values(a.heads.boxes) == test::values(b.heads.boxes));
  fs::remove_all(dir);
}

TEST_CASE("corrupted checkpoints are rejected") {
  const auto c = small_config();
  const auto params = model::init_params(c, 7);
  const std::vector<std::string> names = data::ClassCatalog::defaults().names;
  const fs::path dir = scratch_dir("corrupt");
  save_checkpoint(dir, params, c, names);
  const std::string manifest = data::read_file(dir / "manifest.json");
  const std::string weights = data::read_file(dir / "weights.bin");

  data::write_file(dir / "weights.bin", weights.substr(0, weights.size() - 8));
  CHECK_THROWS_AS(load_checkpoint(dir), IntegrityError);
  data::write_file(dir / "weights.bin", weights);

  auto doc = nlohmann::json::parse(manifest);
  std::swap(doc["tensors"][0], doc["tensors"][1]);
  data::write_file(dir / "manifest.json", doc.dump());
  CHECK_THROWS_AS(load_checkpoint(dir), IntegrityError);

  doc = nlohmann::json::parse(manifest);
  doc["config"]["model_dim"] = 16;
  data::write_file(dir / "manifest.json", doc.dump());
  CHECK_THROWS_AS(load_checkpoint(dir), IntegrityError);

  doc = nlohmann::json::parse(manifest);
  doc["classes"].push_back("extra");
  data::write_file(dir / "manifest.json", doc.dump());
  CHECK_THROWS_AS(load_checkpoint(dir), IntegrityError);

  doc = nlohmann::json::parse(manifest);
  doc["format"] = "other";
  data::write_file(dir / "manifest.json", doc.dump());
  CHECK_THROWS_AS(load_checkpoint(dir), IntegrityError);

  data::write_file(dir / "manifest.json", manifest);
  CHECK_NOTHROW(load_checkpoint(dir));
  CHECK_THROWS_AS(load_checkpoint(dir / "missing"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("config JSON round trip") {
  auto c = small_config();
  c.knn_k = 0;
  c.seed = 12345678901234ull;
  CHECK(parse_config(encode_config(c)) == c);
  CHECK_THROWS_AS(parse_config("{"), ParseError);
}
