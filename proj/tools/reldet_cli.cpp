#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reldet/data/dataset.hpp"
#include "reldet/data/image_io.hpp"
#include "reldet/errors.hpp"
#include "reldet/evaluation/evaluation.hpp"
#include "reldet/model/model.hpp"
#include "reldet/selftest/selftest.hpp"
#include "reldet/training/checkpoint.hpp"
#include "reldet/training/trainer.hpp"

namespace fs = std::filesystem;
using namespace reldet;

namespace {

enum ExitCode : int {
  kOk = 0,
  kSelftestFailed = 1,
  kBadInput = 2,
  kDiverged = 3,
  kCheckpointMismatch = 4,
};

struct GenDataArgs {
  std::uint64_t seed = 0;
  std::size_t count = 20;
  std::string out;
  std::size_t img_size = 32;
  std::size_t max_objects = 4;
  std::vector<std::string> classes = data::ClassCatalog::defaults().names;
};

struct TrainArgs {
  std::string data;
  std::size_t epochs = 300;
  double lr = 1e-3;
  model::ModelConfig model;
  geometry::LossWeights weights;
  double null_weight = matching::kDefaultNullWeight;
  std::string out;
  std::string log;
};

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  double iou_thresh = evaluation::kDefaultIouThreshold;
  std::string json;
};

struct PredictArgs {
  std::string image;
  std::string checkpoint;
  std::string out;
};

struct SelftestArgs {
  std::uint64_t seed = 0;
  bool inject_broken = false;
};

int gen_data(const GenDataArgs& args) {
  if (args.count == 0) {
    std::cerr << "gen-data: --count must be at least 1 (nothing to generate)\n";
    return kBadInput;
  }
  data::SceneConfig config;
  config.image_size = args.img_size;
  config.max_objects = args.max_objects;
  config.catalog.names = args.classes;
  config.catalog.validate();
  const data::Dataset dataset = data::generate_dataset(args.seed, args.count, config);
  data::write_dataset(dataset, args.out);
  std::size_t objects = 0;
  for (const auto& s : dataset.scenes) objects += s.objects.size();
  std::cout << "wrote " << args.count << " scenes (" << objects << " objects, "
            << config.catalog.size() << " classes) to " << args.out << '\n';
  return kOk;
}

int train(TrainArgs args) {
  const data::Dataset dataset = data::load_dataset(args.data);
  if (dataset.scenes.empty()) {
    std::cerr << "train: no scenes in " << args.data << '\n';
    return kBadInput;
  }
  const auto& image = dataset.scenes.front().image;
  args.model.image_height = image.dim(1);
  args.model.image_width = image.dim(2);
  args.model.num_classes = dataset.catalog.size();
  args.model.validate();
  args.weights.validate();

  training::TrainSettings settings;
  settings.epochs = args.epochs;
  settings.adam.lr = args.lr;
  settings.loss.weights = args.weights;
  settings.loss.null_weight = args.null_weight;

  std::ostringstream log;
  log << training::kLogHeader << '\n';
  const auto write_log = [&] {
    if (args.log.empty()) return;
    const std::filesystem::path path(args.log);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    data::write_file(path, log.str());
  };
  model::ModelParams params = model::init_params(args.model, args.model.seed);
  try {
    const auto rows = training::train(dataset, params, args.model, settings,
                                      [&](const training::TrainLogRow& row) {
                                        log << training::format_log_row(row) << '\n';
                                      });
    write_log();
    training::save_checkpoint(args.out, params, args.model, dataset.catalog.names);
    if (!rows.empty())
      std::cout << "trained " << args.epochs << " epochs on " << dataset.scenes.size()
                << " scenes; final loss " << training::format_log_row(rows.back()) << '\n';
  } catch (const training::DivergenceError& e) {
    write_log();
    std::cerr << "train: diverged at epoch " << e.epoch() << ", scene " << e.scene() << ": "
              << e.what() << '\n';
    return kDiverged;
  }
  return kOk;
}

int eval(const EvalArgs& args) {
  const training::Checkpoint ckpt = training::load_checkpoint(args.checkpoint);
  const data::Dataset dataset = data::load_dataset(args.data);
  if (dataset.catalog.names != ckpt.class_names)
    throw IntegrityError("dataset classes do not match the checkpoint's classes");
  for (std::size_t i = 0; i < dataset.scenes.size(); ++i) {
    const auto& img = dataset.scenes[i].image;
    if (img.dim(1) != ckpt.config.image_height || img.dim(2) != ckpt.config.image_width)
      throw IntegrityError(dataset.names[i] + " image size does not match the checkpoint config");
  }
  const auto report = evaluation::evaluate_dataset(dataset, ckpt.params, ckpt.config, args.iou_thresh);
  std::cout << evaluation::format_report(report);
  if (!args.json.empty()) data::write_file(args.json, evaluation::report_json(report));
  return kOk;
}

int predict(const PredictArgs& args) {
  const numeric::Tensor image = data::read_ppm(args.image);
  const training::Checkpoint ckpt = training::load_checkpoint(args.checkpoint);
  if (image.dim(1) != ckpt.config.image_height || image.dim(2) != ckpt.config.image_width) {
    std::cerr << "predict: image is " << image.dim(2) << "x" << image.dim(1) << " but the model expects "
              << ckpt.config.image_width << "x" << ckpt.config.image_height << '\n';
    return kBadInput;
  }
  const auto result = model::forward(image, ckpt.params, ckpt.config);
  const auto detections = evaluation::extract_detections(result.detections());

  const std::string stem = fs::path(args.image).stem().string() + "_pred";
  data::Annotation ann;
  ann.image = stem + ".ppm";
  ann.width = image.dim(2);
  ann.height = image.dim(1);
  for (const auto& d : detections)
    ann.objects.push_back({d.class_id, ckpt.class_names.at(d.class_id), d.box, d.confidence});

  fs::create_directories(args.out);
  data::write_ppm(fs::path(args.out) / ann.image, data::draw_box_outlines(image, ann.objects));
  data::write_file(fs::path(args.out) / (stem + ".json"), data::encode_annotation(ann));
  std::cout << "wrote " << ann.objects.size() << " detections to " << (fs::path(args.out) / stem)
            << ".{json,ppm}\n";
  return kOk;
}

int run_selftest(const SelftestArgs& args) {
  selftest::Options options;
  options.seed = args.seed;
  options.inject_broken_gradient = args.inject_broken;
  std::size_t failed = 0;
  for (const auto& suite : selftest::run_all(options)) {
    std::printf("%-4s %-26s passed %6zu  failed %4zu  %s\n", suite.failed ? "FAIL" : "ok",
                suite.name.c_str(), suite.passed, suite.failed, suite.detail.c_str());
    failed += suite.failed;
  }
  std::printf("%s\n", failed ? "selftest FAILED" : "selftest passed");
  return failed ? kSelftestFailed : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relation-aware transformer detector on synthetic scenes"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed")->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Number of scenes")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--img-size", gen.img_size, "Square image size in pixels")->capture_default_str();
  gen_cmd->add_option("--max-objects", gen.max_objects, "Objects per scene, at most")
      ->capture_default_str();
  gen_cmd->add_option("--classes", gen.classes, "Comma-separated class names")
      ->delimiter(',')
      ->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset directory");
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
  train_cmd->add_option("--epochs", tr.epochs)->capture_default_str();
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--d-model", tr.model.model_dim)->capture_default_str();
  train_cmd->add_option("--heads", tr.model.num_heads)->capture_default_str();
  train_cmd->add_option("--enc-layers", tr.model.num_encoder_layers)->capture_default_str();
  train_cmd->add_option("--dec-layers", tr.model.num_decoder_layers)->capture_default_str();
  train_cmd->add_option("--refine-layers", tr.model.num_refine_layers)->capture_default_str();
  train_cmd->add_option("--ffn-dim", tr.model.ffn_dim)->capture_default_str();
  train_cmd->add_option("--backbone-channels", tr.model.backbone_channels)->capture_default_str();
  train_cmd->add_option("--queries", tr.model.num_queries)->capture_default_str();
  train_cmd->add_option("--knn-k", tr.model.knn_k, "Relation graph neighbors; 0 disables")
      ->capture_default_str();
  train_cmd->add_option("--lambda-iou", tr.weights.lambda_iou)->capture_default_str();
  train_cmd->add_option("--lambda-l1", tr.weights.lambda_l1)->capture_default_str();
  train_cmd->add_option("--null-weight", tr.null_weight)->capture_default_str();
  train_cmd->add_option("--seed", tr.model.seed, "Initialization and shuffling seed")
      ->capture_default_str();
  train_cmd->add_option("--out", tr.out, "Checkpoint directory")->required();
  train_cmd->add_option("--log", tr.log, "CSV training log");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Per-class AP of a checkpoint on a dataset");
  eval_cmd->add_option("--data", ev.data)->required();
  eval_cmd->add_option("--checkpoint", ev.checkpoint)->required();
  eval_cmd->add_option("--iou-thresh", ev.iou_thresh)->capture_default_str();
  eval_cmd->add_option("--json", ev.json, "Also write the report as JSON");

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Detect objects in one PPM image");
  predict_cmd->add_option("--image", pr.image)->required();
  predict_cmd->add_option("--checkpoint", pr.checkpoint)->required();
  predict_cmd->add_option("--out", pr.out, "Output directory")->required();

  SelftestArgs st;
  auto* selftest_cmd = app.add_subcommand("selftest", "Run the built-in consistency suites");
  selftest_cmd->add_option("--seed", st.seed)->capture_default_str();
  selftest_cmd->add_flag("--inject-broken-gradient", st.inject_broken,
                         "Add a case with a wrong backward rule (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*gen_cmd) return gen_data(gen);
    if (*train_cmd) return train(tr);
    if (*eval_cmd) return eval(ev);
    if (*predict_cmd) return predict(pr);
    if (*selftest_cmd) return run_selftest(st);
  } catch (const IntegrityError& e) {
    std::cerr << "checkpoint mismatch: " << e.what() << '\n';
    return kCheckpointMismatch;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  }
  return kBadInput;
}
