#include <doctest.h>

#include <cmath>
#include <numeric>

#include "reldet/errors.hpp"
#include "reldet/model/model.hpp"
#include "reldet/numeric/ops.hpp"
#include "reldet/random.hpp"
#include "support.hpp"

using namespace reldet;
using namespace reldet::model;
namespace nm = reldet::numeric;
using reldet::test::max_abs_diff;
using reldet::test::random_tensor;
using reldet::test::values;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.image_height = c.image_width = 16;
  c.backbone_channels = 4;
  c.model_dim = 8;
  c.num_heads = 2;
  c.ffn_dim = 16;
  c.num_queries = 6;
  c.num_classes = 3;
  c.knn_k = 2;
  return c;
}

ModelParams identity_attention(std::size_t d, const std::string& prefix) {
  ModelParams p;
  std::vector<double> eye(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) eye[i * d + i] = 1.0;
  for (const char* proj : {"q", "k", "v", "o"}) {
    p.add(prefix + "." + proj + ".weight", nm::Tensor({d, d}, eye));
    p.add(prefix + "." + proj + ".bias", nm::Tensor::zeros({d}));
  }
  return p;
}

// Rows of `t` reordered so that row i of the result is row perm[i] of t.
nm::Tensor permute_rows(const nm::Tensor& t, const std::vector<std::size_t>& perm) {
  const std::size_t cols = t.dim(1);
  std::vector<std::size_t> idx;
  for (std::size_t r : perm)
    for (std::size_t c = 0; c < cols; ++c) idx.push_back(r * cols + c);
  return nm::reshape(nm::gather(t, idx), {perm.size(), cols});
}

std::vector<std::size_t> random_perm(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
  return perm;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(ModelConfig{}.validate());
  ModelConfig c;
  c.num_heads = 5;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = {};
  c.num_queries = 0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = {};
  c.num_classes = 0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = {};
  c.image_height = 30;
  CHECK_THROWS_AS(c.validate(), ContractError);
}

TEST_CASE("init_params") {
  const ModelConfig c;
  const ModelParams a = init_params(c, 3), b = init_params(c, 3), other = init_params(c, 4);
  REQUIRE(a.size() == b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.entries()[i].first == b.entries()[i].first);
    CHECK(values(a.entries()[i].second) == values(b.entries()[i].second));
    differs = differs || values(a.entries()[i].second) != values(other.entries()[i].second);
    for (double v : a.entries()[i].second.data()) CHECK(std::isfinite(v));
  }
  CHECK(differs);

  const auto& w = a.get("backbone.conv1.weight");
  CHECK(w.shape() == nm::Shape{16, 3, 3, 3});
  const double bound = 1.0 / std::sqrt(27.0);
  for (double v : w.data()) CHECK(std::abs(v) <= bound);
  for (double v : a.get("backbone.conv1.bias").data()) CHECK(v == 0.0);
  CHECK(a.get("query_embed").shape() == nm::Shape{16, 32});
  double sq = 0;
  for (double v : a.get("query_embed").data()) sq += v * v;
  CHECK(std::sqrt(sq / 512.0) == doctest::Approx(0.02).epsilon(0.15));
  CHECK(a.get("relation.weight").shape() == nm::Shape{32, 64});
  CHECK(a.get("head.class.weight").shape() == nm::Shape{32, 6});
  CHECK_THROWS_AS(a.get("nope"), ContractError);
}

TEST_CASE("backbone shapes") {
  const ModelConfig c;
  const ModelParams p = init_params(c, 0);
  Rng rng(1);
  const auto f = backbone_forward(random_tensor({3, 32, 32}, rng, 0, 1), p, c);
  CHECK(f.shape() == nm::Shape{16, 4, 4});
  CHECK_THROWS_AS(backbone_forward(nm::Tensor::zeros({3, 16, 16}), p, c), DimensionError);
  const auto zero = backbone_forward(nm::Tensor::zeros({3, 32, 32}), p, c);
  CHECK(values(zero) == std::vector<double>(zero.numel(), 0.0));
}

TEST_CASE("1x1 convolution mixes channels per pixel") {
  const nm::Tensor x({2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
  const nm::Tensor w({2, 2, 1, 1}, {1, 0.5, -1, 2});
  const nm::Tensor b = nm::Tensor::vector({0.5, 0});
  const auto y = nm::conv2d(x, w, b, 1, 0);
  CHECK(values(y) == std::vector<double>{6.5, 12.5, 18.5, 24.5, 19, 38, 57, 76});
}

TEST_CASE("channel_reduce") {
  ModelConfig c;
  ModelParams p = init_params(c, 0);
  Rng rng(2);
  const auto f = random_tensor({16, 4, 4}, rng);
  const auto z = channel_reduce(f, p);
  CHECK(z.shape() == nm::Shape{32, 4, 4});
  const auto& w = p.get("reduce.weight");
  for (std::size_t o = 0; o < 32; o += 7)
    for (std::size_t px = 0; px < 16; px += 5) {
      double acc = p.get("reduce.bias")[o];
      for (std::size_t ch = 0; ch < 16; ++ch) acc += w[o * 16 + ch] * f[ch * 16 + px];
      CHECK(z[o * 16 + px] == doctest::Approx(acc).epsilon(1e-12));
    }

  ModelParams eye;
  std::vector<double> id(16 * 16, 0.0);
  for (std::size_t i = 0; i < 16; ++i) id[i * 16 + i] = 1.0;
  eye.add("reduce.weight", nm::Tensor({16, 16}, id));
  eye.add("reduce.bias", nm::Tensor::zeros({16}));
  CHECK(values(channel_reduce(f, eye)) == values(f));
  CHECK_THROWS_AS(channel_reduce(random_tensor({8, 4, 4}, rng), p), DimensionError);
}

TEST_CASE("flatten_hw") {
  Rng rng(3);
  const auto z = random_tensor({8, 4, 4}, rng);
  const auto t = flatten_hw(z);
  CHECK(t.shape() == nm::Shape{16, 8});
  CHECK(values(unflatten_hw(t, 4, 4)) == values(z));
  for (std::size_t ch = 0; ch < 8; ++ch) CHECK(t.at(6, ch) == z[(ch * 4 + 1) * 4 + 2]);
}

TEST_CASE("sinusoidal_pe") {
  const auto pe = sinusoidal_pe(10, 8);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(pe.at(0, 2 * i) == 0.0);
    CHECK(pe.at(0, 2 * i + 1) == 1.0);
  }
  for (double v : pe.data()) CHECK(std::abs(v) <= 1.0);
  CHECK(pe.at(1, 0) == doctest::Approx(0.8415).epsilon(1e-4));
  CHECK(pe.at(1, 1) == doctest::Approx(0.5403).epsilon(1e-4));
  CHECK(pe.at(1, 0) == std::sin(1.0));
  CHECK_THROWS_AS(sinusoidal_pe(4, 7), ContractError);
}

TEST_CASE("attention with a single key") {
  Rng rng(4);
  ModelParams p;
  for (const char* proj : {"q", "k", "v", "o"}) {
    p.add(std::string("a.") + proj + ".weight", random_tensor({4, 4}, rng));
    p.add(std::string("a.") + proj + ".bias", random_tensor({4}, rng));
  }
  const auto x = random_tensor({1, 4}, rng);
  const auto out = multi_head_attention(x, x, x, p, "a", 2);
  const auto expect = nm::add_bias(
      nm::matmul(nm::add_bias(nm::matmul(x, p.get("a.v.weight")), p.get("a.v.bias")),
                 p.get("a.o.weight")),
      p.get("a.o.bias"));
  CHECK(max_abs_diff(out, expect) <= 1e-15);
}

TEST_CASE("attention by hand") {
  const ModelParams p = identity_attention(2, "a");
  const auto q = nm::Tensor::matrix({{1, 0}});
  const auto kv = nm::Tensor::matrix({{1, 0}, {0, 1}});
  const auto out = multi_head_attention(q, kv, kv, p, "a", 1);
  const double e = std::exp(1.0 / std::sqrt(2.0));
  CHECK(out.at(0, 0) == doctest::Approx(e / (e + 1)).epsilon(1e-15));
  CHECK(out.at(0, 1) == doctest::Approx(1 / (e + 1)).epsilon(1e-15));
  CHECK_THROWS_AS(multi_head_attention(q, kv, nm::Tensor::zeros({3, 2}), p, "a", 1), DimensionError);
  CHECK_THROWS_AS(multi_head_attention(nm::Tensor::zeros({1, 3}), kv, kv, p, "a", 1), DimensionError);
}

TEST_CASE("self-attention is permutation equivariant") {
  Rng rng(5);
  ModelParams p;
  for (const char* proj : {"q", "k", "v", "o"}) {
    p.add(std::string("a.") + proj + ".weight", random_tensor({8, 8}, rng));
    p.add(std::string("a.") + proj + ".bias", random_tensor({8}, rng));
  }
  const auto x = random_tensor({6, 8}, rng);
  const auto perm = random_perm(6, rng);
  const auto px = permute_rows(x, perm);
  const auto out = multi_head_attention(x, x, x, p, "a", 4);
  CHECK(max_abs_diff(multi_head_attention(px, px, px, p, "a", 4), permute_rows(out, perm)) <= 1e-12);
}

TEST_CASE("encoder layer matches its composition") {
  ModelConfig c = small_config();
  c.num_encoder_layers = 1;
  const ModelParams p = init_params(c, 6);
  Rng rng(6);
  const auto tokens = random_tensor({4, 8}, rng);
  const auto pe = sinusoidal_pe(4, 8);
  const auto out = encoder_forward(tokens, pe, p, c);
  CHECK(out.shape() == tokens.shape());

  const auto lin = [&](const nm::Tensor& x, const std::string& name) {
    return nm::add_bias(nm::matmul(x, p.get(name + ".weight")), p.get(name + ".bias"));
  };
  const auto qk = nm::add(tokens, pe);
  auto x = nm::layer_norm(nm::add(tokens, multi_head_attention(qk, qk, tokens, p, "encoder.0.attn", 2)));
  x = nm::layer_norm(nm::add(x, lin(nm::relu(lin(x, "encoder.0.ffn.1")), "encoder.0.ffn.2")));
  CHECK(values(out) == values(x));

  ModelParams zero;
  for (const auto& [name, t] : p.entries()) zero.add(name, nm::Tensor::zeros(t.shape()));
  const auto kept = encoder_forward(tokens, pe, zero, c);
  CHECK(max_abs_diff(kept, nm::layer_norm(nm::layer_norm(tokens))) <= 1e-12);
  CHECK_THROWS_AS(encoder_forward(tokens, sinusoidal_pe(5, 8), p, c), DimensionError);
}

TEST_CASE("encoder is equivariant to token permutations with their positions") {
  const ModelConfig c = small_config();
  const ModelParams p = init_params(c, 7);
  Rng rng(7);
  const auto tokens = random_tensor({4, 8}, rng);
  const auto pe = sinusoidal_pe(4, 8);
  const auto perm = random_perm(4, rng);
  const auto out = encoder_forward(tokens, pe, p, c);
  const auto pout = encoder_forward(permute_rows(tokens, perm), permute_rows(pe, perm), p, c);
  CHECK(max_abs_diff(pout, permute_rows(out, perm)) <= 1e-12);
}

TEST_CASE("prediction heads") {
  const ModelConfig c = small_config();
  ModelParams p = init_params(c, 8);
  Rng rng(8);
  const auto heads = predict_heads(random_tensor({6, 8}, rng, -3, 3), p);
  CHECK(heads.probs.shape() == nm::Shape{6, 4});
  CHECK(heads.boxes.shape() == nm::Shape{6, 4});
  for (std::size_t i = 0; i < 6; ++i) {
    double total = 0;
    for (std::size_t k = 0; k < 4; ++k) total += heads.probs.at(i, k);
    CHECK(std::abs(total - 1.0) <= 1e-9);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(heads.boxes.at(i, k) > 0.0);
      CHECK(heads.boxes.at(i, k) < 1.0);
    }
  }
  p.get("head.class.weight") = nm::Tensor::zeros(p.get("head.class.weight").shape());
  const auto uniform = predict_heads(random_tensor({2, 8}, rng), p);
  for (double v : uniform.probs.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("decoder output shapes and query equivariance") {
  const ModelConfig c = small_config();
  const ModelParams p = init_params(c, 9);
  Rng rng(9);
  const auto memory = random_tensor({4, 8}, rng);
  const auto pe = sinusoidal_pe(4, 8);
  const auto queries = random_tensor({6, 8}, rng);
  const auto out = decoder_forward(memory, queries, pe, p, c);
  CHECK(out.embeddings.shape() == nm::Shape{6, 8});
  CHECK(out.prelim_embeddings.shape() == nm::Shape{6, 8});
  for (int trial = 0; trial < 10; ++trial) {
    const auto perm = random_perm(6, rng);
    const auto pout = decoder_forward(memory, permute_rows(queries, perm), pe, p, c);
    CHECK(max_abs_diff(pout.embeddings, permute_rows(out.embeddings, perm)) <= 1e-12);
    CHECK(max_abs_diff(pout.prelim.boxes, permute_rows(out.prelim.boxes, perm)) <= 1e-12);
  }
}

TEST_CASE("relation ablation with an identity-on-self layer") {
  ModelConfig c = small_config();
  c.knn_k = 0;
  ModelParams p = init_params(c, 10);
  std::vector<double> w(8 * 16, 0.0);
  for (std::size_t i = 0; i < 8; ++i) w[i * 16 + i] = 1.0;
  p.get("relation.weight") = nm::Tensor({8, 16}, w);
  Rng rng(10);
  const auto memory = random_tensor({4, 8}, rng);
  const auto pe = sinusoidal_pe(4, 8);
  const auto queries = random_tensor({6, 8}, rng);
  const auto out = decoder_forward(memory, queries, pe, p, c);
  CHECK(out.graph.edges.empty());
  // The relation layer's ReLU passes only the nonnegative part of the
  // layer-normed pass-1 embeddings on to pass 2.
  const auto direct = decoder_stack(nm::relu(out.prelim_embeddings), queries, memory, pe, p, "refine",
                                    c.num_refine_layers, c.num_heads);
  CHECK(values(out.embeddings) == values(direct));
}

TEST_CASE("forward") {
  const ModelConfig c;
  const ModelParams p = init_params(c, 11);
  Rng rng(11);
  const auto image = random_tensor({3, 32, 32}, rng, 0, 1);
  const auto a = forward(image, p, c);
  const auto b = forward(image, p, c);
  const auto det = a.detections();
  CHECK(det.predictions.size() == 16);
  CHECK(det.predictions[0].class_probs.size() == 6);
  CHECK(values(a.heads.probs) == values(b.heads.probs));
  CHECK(values(a.heads.boxes) == values(b.heads.boxes));
}
