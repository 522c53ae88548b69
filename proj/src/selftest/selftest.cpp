#include "reldet/selftest/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "reldet/data/scene.hpp"
#include "reldet/evaluation/evaluation.hpp"
#include "reldet/geometry/box.hpp"
#include "reldet/matching/matching.hpp"
#include "reldet/model/model.hpp"
#include "reldet/numeric/gradcheck.hpp"
#include "reldet/numeric/ops.hpp"
#include "reldet/random.hpp"
#include "reldet/relation/relation.hpp"
#include "reldet/simd/kernels.hpp"
#include "reldet/training/trainer.hpp"

namespace reldet::selftest {

namespace nm = reldet::numeric;
using nm::Shape;
using nm::Tensor;

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  std::vector<double> v(nm::shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(shape, std::move(v));
}

// Contracts an op output against fixed random weights so every output entry
// contributes a distinct, nonzero sensitivity.
Tensor weigh(const Tensor& out, std::uint64_t seed) {
  Rng rng(seed ^ 0xA5A5A5A5ull);
  return nm::sum(nm::mul(out, random_tensor(out.shape(), rng, -1.0, 1.0)));
}

GradCase unary_case(std::string name, Shape shape, double lo, double hi,
                    std::function<Tensor(const Tensor&)> op) {
  return {std::move(name), std::move(shape), lo, hi,
          [op](const Tensor& x, std::uint64_t seed) { return weigh(op(x), seed); }};
}

// `op(x, c)` with a constant fixture c of shape `other` drawn from [clo, chi].
GradCase binary_case(std::string name, Shape shape, double lo, double hi, Shape other, double clo,
                     double chi, std::function<Tensor(const Tensor&, const Tensor&)> op) {
  return {std::move(name), std::move(shape), lo, hi,
          [op, other, clo, chi](const Tensor& x, std::uint64_t seed) {
            Rng rng(seed);
            return weigh(op(x, random_tensor(other, rng, clo, chi)), seed);
          }};
}

model::ModelParams attention_params(std::size_t d, Rng& rng) {
  model::ModelParams p;
  for (const char* proj : {"q", "k", "v", "o"}) {
    p.add(std::string("attn.") + proj + ".weight", random_tensor({d, d}, rng, -0.5, 0.5));
    p.add(std::string("attn.") + proj + ".bias", random_tensor({d}, rng, -0.1, 0.1));
  }
  return p;
}

}  // namespace

std::vector<GradCase> op_gradient_cases() {
  const Shape m{3, 4};
  std::vector<GradCase> cases;
  cases.push_back(binary_case("add", m, -1, 1, m, -1, 1, nm::add));
  cases.push_back(binary_case("add.scalar", m, -1, 1, {}, -1, 1, nm::add));
  cases.push_back(binary_case("sub", m, -1, 1, m, -1, 1,
                              [](const Tensor& x, const Tensor& c) { return nm::sub(c, x); }));
  cases.push_back(binary_case("mul", m, -1, 1, m, -1, 1, nm::mul));
  cases.push_back(unary_case("mul.self", m, -1, 1, [](const Tensor& x) { return nm::mul(x, x); }));
  cases.push_back(binary_case("div.numerator", m, -1, 1, m, 0.5, 2, nm::div));
  cases.push_back(binary_case("div.denominator", m, 0.5, 2, m, -1, 1,
                              [](const Tensor& x, const Tensor& c) { return nm::div(c, x); }));
  cases.push_back(binary_case("safe_div", m, 0.5, 2, m, -1, 1,
                              [](const Tensor& x, const Tensor& c) { return nm::safe_div(c, x); }));
  cases.push_back(binary_case("minimum", m, -1, 1, m, -1, 1, nm::minimum));
  cases.push_back(binary_case("maximum", m, -1, 1, m, -1, 1, nm::maximum));
  cases.push_back(unary_case("neg", m, -1, 1, nm::neg));
  cases.push_back(unary_case("scale", m, -1, 1, [](const Tensor& x) { return nm::scale(x, -1.7); }));
  cases.push_back(
      unary_case("add_scalar", m, -1, 1, [](const Tensor& x) { return nm::add_scalar(x, 0.3); }));
  cases.push_back(unary_case("relu", m, -1, 1, nm::relu));
  cases.push_back(unary_case("sigmoid", m, -3, 3, nm::sigmoid));
  cases.push_back(unary_case("exp", m, -2, 2, nm::exp));
  cases.push_back(unary_case("log", m, 0.2, 2, nm::log));
  cases.push_back(unary_case("abs", m, -1, 1, nm::abs));
  cases.push_back(unary_case("square", m, -1, 1, nm::square));
  cases.push_back(
      unary_case("clamp_min", m, -1, 1, [](const Tensor& x) { return nm::clamp_min(x, 0.1); }));
  cases.push_back(unary_case("sum", m, -1, 1, nm::sum));
  cases.push_back(unary_case("mean", m, -1, 1, nm::mean));
  cases.push_back(
      unary_case("reshape", m, -1, 1, [](const Tensor& x) { return nm::reshape(x, {2, 6}); }));
  cases.push_back(unary_case("transpose", m, -1, 1, nm::transpose));
  cases.push_back(binary_case("concat.axis0", m, -1, 1, {2, 4}, -1, 1,
                              [](const Tensor& x, const Tensor& c) { return nm::concat({c, x}, 0); }));
  cases.push_back(binary_case("concat.axis1", m, -1, 1, {3, 2}, -1, 1,
                              [](const Tensor& x, const Tensor& c) { return nm::concat({x, c, x}, 1); }));
  cases.push_back(
      unary_case("slice", m, -1, 1, [](const Tensor& x) { return nm::slice(x, 1, 1, 3); }));
  cases.push_back(unary_case("gather", m, -1, 1, [](const Tensor& x) {
    const std::size_t idx[] = {0, 5, 5, 11, 2};
    return nm::gather(x, idx);
  }));
  cases.push_back(binary_case("matmul.left", m, -1, 1, {4, 2}, -1, 1, nm::matmul));
  cases.push_back(binary_case("matmul.right", m, -1, 1, {5, 3}, -1, 1,
                              [](const Tensor& x, const Tensor& c) { return nm::matmul(c, x); }));
  cases.push_back(binary_case("add_bias.input", m, -1, 1, {4}, -1, 1, nm::add_bias));
  cases.push_back(binary_case("add_bias.bias", {4}, -1, 1, m, -1, 1,
                              [](const Tensor& x, const Tensor& c) { return nm::add_bias(c, x); }));
  cases.push_back(binary_case("add_channel_bias", {3}, -1, 1, {3, 2, 2}, -1, 1,
                              [](const Tensor& x, const Tensor& c) {
                                return nm::add_channel_bias(c, x);
                              }));
  cases.push_back(
      unary_case("softmax.axis0", m, -2, 2, [](const Tensor& x) { return nm::softmax(x, 0); }));
  cases.push_back(
      unary_case("softmax.axis1", m, -2, 2, [](const Tensor& x) { return nm::softmax(x, 1); }));
  cases.push_back(unary_case("layer_norm", m, -1, 1, [](const Tensor& x) { return nm::layer_norm(x); }));

  cases.push_back({"conv2d.input", {2, 5, 5}, -1, 1, [](const Tensor& x, std::uint64_t seed) {
                     Rng rng(seed);
                     const Tensor w = random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
                     const Tensor b = random_tensor({3}, rng, -0.1, 0.1);
                     return weigh(nm::conv2d(x, w, b, 2, 1), seed);
                   }});
  cases.push_back({"conv2d.weight", {3, 2, 3, 3}, -0.5, 0.5, [](const Tensor& w, std::uint64_t seed) {
                     Rng rng(seed);
                     const Tensor x = random_tensor({2, 5, 5}, rng, -1, 1);
                     const Tensor b = random_tensor({3}, rng, -0.1, 0.1);
                     return weigh(nm::conv2d(x, w, b, 2, 1), seed);
                   }});
  cases.push_back({"conv2d.bias", {3}, -0.5, 0.5, [](const Tensor& b, std::uint64_t seed) {
                     Rng rng(seed);
                     const Tensor x = random_tensor({2, 4, 4}, rng, -1, 1);
                     const Tensor w = random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
                     return weigh(nm::conv2d(x, w, b, 1, 1), seed);
                   }});

  // Boxes with every coordinate in [0.25, 0.6] keep both areas positive.
  cases.push_back({"giou", {3, 4}, 0.25, 0.6, [](const Tensor& pred, std::uint64_t seed) {
                     Rng rng(seed);
                     return weigh(geometry::giou(random_tensor({3, 4}, rng, 0.25, 0.6), pred), seed);
                   }});
  cases.push_back({"box_loss", {3, 4}, 0.25, 0.6, [](const Tensor& pred, std::uint64_t seed) {
                     Rng rng(seed);
                     const Tensor target = random_tensor({3, 4}, rng, 0.25, 0.6);
                     return nm::sum(geometry::box_loss(target, pred, geometry::LossWeights{}));
                   }});

  const auto graph_for = [](Rng& rng, std::size_t n) {
    std::vector<relation::Point> centers(n);
    for (auto& c : centers) c = {rng.uniform(), rng.uniform()};
    return relation::build_knn_graph(centers, 2);
  };
  cases.push_back({"aggregate.features", {5, 3}, -1, 1,
                   [graph_for](const Tensor& x, std::uint64_t seed) {
                     Rng rng(seed);
                     const auto g = graph_for(rng, 5);
                     relation::RelationLayerParams p{random_tensor({3, 6}, rng, -1, 1),
                                                     random_tensor({3}, rng, -0.2, 0.2)};
                     return weigh(relation::aggregate(x, g, p), seed);
                   }});
  cases.push_back({"aggregate.weight", {3, 6}, -1, 1,
                   [graph_for](const Tensor& w, std::uint64_t seed) {
                     Rng rng(seed);
                     const auto g = graph_for(rng, 5);
                     const Tensor x = random_tensor({5, 3}, rng, -1, 1);
                     return weigh(relation::aggregate(x, g, {w, random_tensor({3}, rng, -0.2, 0.2)}),
                                  seed);
                   }});

  cases.push_back({"multi_head_attention", {3, 4}, -1, 1, [](const Tensor& x, std::uint64_t seed) {
                     Rng rng(seed);
                     const model::ModelParams p = attention_params(4, rng);
                     const Tensor memory = random_tensor({5, 4}, rng, -1, 1);
                     const Tensor self = model::multi_head_attention(x, x, x, p, "attn", 2);
                     const Tensor cross = model::multi_head_attention(x, memory, memory, p, "attn", 2);
                     return nm::add(weigh(self, seed), weigh(cross, seed + 1));
                   }});

  // Hungarian loss through softmax logits and sigmoid box parameters.
  const auto loss_fixture = [](Rng& rng) {
    std::vector<matching::GroundTruth> gt = {{0, {0.3, 0.4, 0.2, 0.3}}, {2, {0.7, 0.6, 0.3, 0.2}}};
    auto padded = matching::pad_targets(gt, 4, 3);
    matching::Assignment a{{2, 0, 3, 1}, 0.0};
    (void)rng;
    return std::make_pair(padded, a);
  };
  cases.push_back({"hungarian_loss.logits", {4, 4}, -2, 2,
                   [loss_fixture](const Tensor& logits, std::uint64_t seed) {
                     Rng rng(seed);
                     auto [targets, assignment] = loss_fixture(rng);
                     const Tensor boxes = nm::sigmoid(random_tensor({4, 4}, rng, -1, 1));
                     return matching::hungarian_loss(targets, nm::softmax(logits, 1), boxes,
                                                     assignment, {}, 0.1)
                         .total;
                   }});
  cases.push_back({"hungarian_loss.boxes", {4, 4}, -1, 1,
                   [loss_fixture](const Tensor& raw, std::uint64_t seed) {
                     Rng rng(seed);
                     auto [targets, assignment] = loss_fixture(rng);
                     const Tensor probs = nm::softmax(random_tensor({4, 4}, rng, -2, 2), 1);
                     return matching::hungarian_loss(targets, probs, nm::sigmoid(raw), assignment,
                                                     {}, 0.1)
                         .total;
                   }});
  return cases;
}

GradCase broken_gradient_case() {
  return {"injected.broken_square", {3, 4}, -1, 1, [](const Tensor& x, std::uint64_t seed) {
            // x² forward with a backward rule of x instead of 2x.
            Tensor out = nm::square(x);
            if (x.tape()) {
              std::vector<double> v(out.data().begin(), out.data().end());
              out = x.tape()->record(x.shape(), std::move(v), [x](const double* g, nm::Tape& tape) {
                double* gx = tape.grad_buffer(*x.node_id());
                for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g[i] * x[i];
              });
            }
            return weigh(out, seed);
          }};
}

GradSweep sweep_gradients(const std::vector<GradCase>& cases, std::size_t trials,
                          std::uint64_t seed, double tolerance, double eps) {
  GradSweep sweep;
  Rng rng(seed);
  for (const auto& c : cases) {
    for (std::size_t t = 0; t < trials; ++t) {
      const std::uint64_t fixture_seed = rng.next();
      const Tensor x = random_tensor(c.input_shape, rng, c.lo, c.hi);
      const auto result = nm::check_gradient(
          [&](const Tensor& in) { return c.loss(in, fixture_seed); }, x, eps);
      ++sweep.checks;
      if (result.max_rel_error > tolerance) ++sweep.failures;
      if (result.max_rel_error >= sweep.worst_error) {
        sweep.worst_error = result.max_rel_error;
        sweep.worst_case = c.name;
      }
    }
  }
  return sweep;
}

EndToEndCheck end_to_end_gradient_check(std::uint64_t seed, std::size_t samples, double eps) {
  model::ModelConfig config;
  config.image_height = config.image_width = 16;
  config.backbone_channels = 4;
  config.model_dim = 8;
  config.num_heads = 2;
  config.ffn_dim = 16;
  config.num_queries = 4;
  config.num_classes = 5;
  config.knn_k = 2;
  config.seed = seed;

  data::SceneConfig scene_cfg;
  scene_cfg.image_size = 16;
  scene_cfg.max_objects = 3;
  const data::Scene scene = data::generate_scene(seed + 17, scene_cfg);
  // Zero-initialized biases put ReLU inputs exactly on the kink wherever a
  // whole patch is dead; jitter every parameter off it.
  model::ModelParams params = model::init_params(config, seed);
  Rng jitter(seed ^ 0x7177E4ull);
  for (auto& entry : params.entries())
    for (double& v : entry.second.mutable_data()) v += jitter.uniform(-0.05, 0.05);
  const training::LossSettings loss;

  nm::Tape tape;
  const model::ModelParams watched = params.watch(tape);
  const training::SceneLoss base = training::scene_loss(scene, watched, config, loss);
  tape.backward(base.terms.total);

  EndToEndCheck check;
  Rng rng(seed ^ 0xE2Eull);
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t p = rng.uniform_int(0, params.size() - 1);
    const auto& [name, value] = params.entries()[p];
    const std::size_t i = rng.uniform_int(0, value.numel() - 1);
    const double analytic = tape.grad(watched.entries()[p].second)[i];

    const auto loss_at = [&](double delta) {
      model::ModelParams probe = params;
      probe.get(name).mutable_data()[i] += delta;
      return training::scene_loss(scene, probe, config, loss, &base.assignment).terms.total.item();
    };
    const double numeric = (loss_at(eps) - loss_at(-eps)) / (2.0 * eps);
    const double err = nm::relative_error(analytic, numeric);
    ++check.sampled;
    if (err >= check.worst_error) {
      check.worst_error = err;
      check.worst_param = name + "[" + std::to_string(i) + "]";
    }
  }
  return check;
}

namespace {

SuiteResult named(std::string name) {
  SuiteResult r;
  r.name = std::move(name);
  return r;
}

SuiteResult hungarian_suite(std::uint64_t seed) {
  SuiteResult r = named("hungarian_vs_brute_force");
  Rng rng(seed);
  for (std::size_t n = 1; n <= 7; ++n) {
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> v(n * n);
      // Half the matrices use small integers so ties are common.
      const bool integral = trial % 2 == 0;
      for (double& x : v)
        x = integral ? static_cast<double>(rng.uniform_int(0, 4)) : rng.uniform(-1.0, 1.0);
      const matching::CostMatrix cost(n, n, std::move(v));
      const bool ok =
          matching::hungarian(cost).total_cost == matching::brute_force_assign(cost).total_cost;
      ok ? ++r.passed : ++r.failed;
    }
  }
  return r;
}

SuiteResult gradient_suite(std::uint64_t seed, bool inject_broken) {
  SuiteResult r = named("op_gradients");
  auto cases = op_gradient_cases();
  if (inject_broken) cases.push_back(broken_gradient_case());
  for (const auto& c : cases) {
    const GradSweep sweep = sweep_gradients({c}, 3, seed ^ std::hash<std::string>{}(c.name), 1e-4);
    if (sweep.failures == 0) {
      ++r.passed;
    } else {
      ++r.failed;
      r.detail += c.name + " (rel err " + std::to_string(sweep.worst_error) + ") ";
    }
  }
  return r;
}

SuiteResult end_to_end_suite(std::uint64_t seed) {
  SuiteResult r = named("end_to_end_gradient");
  const EndToEndCheck check = end_to_end_gradient_check(seed, 20);
  (check.worst_error <= 1e-3 ? r.passed : r.failed) += 1;
  r.detail = "worst rel err " + std::to_string(check.worst_error) + " at " + check.worst_param;
  return r;
}

geometry::Box random_box(Rng& rng) {
  const double w = rng.uniform(0.01, 0.6);
  const double h = rng.uniform(0.01, 0.6);
  return {rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), w, h};
}

SuiteResult giou_suite(std::uint64_t seed) {
  SuiteResult r = named("giou_invariants");
  Rng rng(seed);
  for (int i = 0; i < 10000; ++i) {
    const geometry::Box a = random_box(rng);
    const geometry::Box b = random_box(rng);
    const double g = geometry::giou(a, b);
    const bool ok = g > -1.0 && g <= 1.0 && g <= geometry::iou(a, b) &&
                    g == geometry::giou(b, a) && geometry::giou(a, a) == 1.0;
    ok ? ++r.passed : ++r.failed;
  }
  const double fixed = geometry::giou(geometry::Corners{0, 0, 2, 2}, geometry::Corners{1, 1, 3, 3});
  (std::abs(fixed - (-5.0 / 63.0)) < 1e-15 ? r.passed : r.failed) += 1;
  (geometry::giou(geometry::Corners{0, 0, 1, 1}, geometry::Corners{1, 0, 2, 1}) == 0.0 ? r.passed
                                                                                       : r.failed) += 1;
  return r;
}

SuiteResult ap_suite() {
  SuiteResult r = named("average_precision_oracle");
  const auto ap = evaluation::average_precision({true, false, true}, 2);
  (ap && std::abs(*ap - 5.0 / 6.0) < 1e-15 ? r.passed : r.failed) += 1;
  (evaluation::average_precision({true}, 1) == 1.0 ? r.passed : r.failed) += 1;
  (evaluation::average_precision({}, 3) == 0.0 ? r.passed : r.failed) += 1;
  (!evaluation::average_precision({true}, 0) ? r.passed : r.failed) += 1;
  return r;
}

SuiteResult knn_suite(std::uint64_t seed) {
  SuiteResult r = named("knn_graph");
  Rng rng(seed);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = rng.uniform_int(0, 9);
    const std::size_t k = rng.uniform_int(0, 5);
    std::vector<relation::Point> centers(n);
    for (auto& c : centers) c = {rng.uniform(), rng.uniform()};
    const auto g = relation::build_knn_graph(centers, k);
    bool ok = true;
    const auto adj = g.adjacency();
    for (std::size_t i = 0; i < n; ++i) {
      ok = ok && adj[i].size() >= std::min(k, n - 1);
      for (std::size_t j : adj[i]) ok = ok && j != i && g.has_edge(j, i);
    }
    ok = ok && std::adjacent_find(g.edges.begin(), g.edges.end()) == g.edges.end();
    ok ? ++r.passed : ++r.failed;
  }
  return r;
}

SuiteResult simd_suite(std::uint64_t seed) {
  SuiteResult r = named("simd_equivalence");
  if (!simd::is_supported(simd::Level::kAvx2)) {
    r.passed = 1;
    r.detail = "avx2 unavailable; scalar only";
    return r;
  }
  const auto& ref = simd::scalar_kernels();
  const auto& vec = simd::avx2_kernels();
  Rng rng(seed);
  const auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::abs(a[i] - b[i]) > 1e-12 * (1.0 + std::abs(a[i]))) return false;
    return true;
  };
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = rng.uniform_int(1, 9), k = rng.uniform_int(1, 21), n = rng.uniform_int(1, 37);
    std::vector<double> a(m * k), b(k * n), bt(m * n), bn(k * n);
    for (double* buf : {a.data(), b.data()})
      for (std::size_t i = 0; i < (buf == a.data() ? a.size() : b.size()); ++i)
        buf[i] = rng.uniform(-1.0, 1.0);
    for (double& x : bt) x = rng.uniform(-1.0, 1.0);
    for (double& x : bn) x = rng.uniform(-1.0, 1.0);

    std::vector<double> c1(m * n, 0.5), c2(m * n, 0.5);
    ref.gemm(a.data(), b.data(), c1.data(), m, k, n);
    vec.gemm(a.data(), b.data(), c2.data(), m, k, n);
    bool ok = close(c1, c2);

    std::vector<double> t1(k * n, 0.0), t2(k * n, 0.0);
    ref.gemm_tn(a.data(), bt.data(), t1.data(), m, k, n);
    vec.gemm_tn(a.data(), bt.data(), t2.data(), m, k, n);
    ok = ok && close(t1, t2);

    std::vector<double> s1(m * k, 0.0), s2(m * k, 0.0);
    ref.gemm_nt(bt.data(), bn.data(), s1.data(), m, k, n);
    vec.gemm_nt(bt.data(), bn.data(), s2.data(), m, k, n);
    ok = ok && close(s1, s2);

    std::vector<double> y1(b), y2(b);
    ref.axpy(0.7, bn.data(), y1.data(), bn.size());
    vec.axpy(0.7, bn.data(), y2.data(), bn.size());
    ok = ok && close(y1, y2);
    ok = ok && close({ref.dot(b.data(), bn.data(), b.size())}, {vec.dot(b.data(), bn.data(), b.size())});
    ok ? ++r.passed : ++r.failed;
  }
  return r;
}

}  // namespace

std::vector<SuiteResult> run_all(const Options& options) {
  return {hungarian_suite(options.seed),
          gradient_suite(options.seed, options.inject_broken_gradient),
          end_to_end_suite(options.seed),
          giou_suite(options.seed),
          ap_suite(),
          knn_suite(options.seed),
          simd_suite(options.seed)};
}

}  // namespace reldet::selftest
