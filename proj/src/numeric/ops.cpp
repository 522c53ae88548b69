#include "reldet/numeric/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "reldet/errors.hpp"
#include "reldet/simd/kernels.hpp"

namespace reldet::numeric {
namespace {

using Values = std::vector<double>;

Tape* common_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->tape()) continue;
    if (tape && tape != t->tape()) throw ContractError("operands are recorded on different tapes");
    tape = t->tape();
  }
  return tape;
}

Tensor finish(Tape* tape, Shape shape, Values out, Tape::Backward backward) {
  if (!tape) return Tensor(std::move(shape), std::move(out));
  return tape->record(std::move(shape), std::move(out), std::move(backward));
}

double* grad_of(Tape& tape, const Tensor& x) {
  return x.requires_grad() ? tape.grad_buffer(*x.node_id()) : nullptr;
}

std::string pair_str(const Tensor& a, const Tensor& b) {
  return shape_str(a.shape()) + " and " + shape_str(b.shape());
}

// f(x, y) with partials dfdx(x, y), dfdy(x, y).
template <class F, class Dx, class Dy>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, F f, Dx dfdx, Dy dfdy) {
  Shape shape;
  bool a_bcast = false;
  bool b_bcast = false;
  if (a.shape() == b.shape()) {
    shape = a.shape();
  } else if (b.numel() == 1) {
    shape = a.shape();
    b_bcast = true;
  } else if (a.numel() == 1) {
    shape = b.shape();
    a_bcast = true;
  } else {
    throw DimensionError(std::string(name) + ": incompatible shapes " + pair_str(a, b));
  }
  const std::size_t n = shape_numel(shape);
  const auto av = a.data();
  const auto bv = b.data();
  Values out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[a_bcast ? 0 : i], bv[b_bcast ? 0 : i]);
  return finish(common_tape({&a, &b}), std::move(shape), std::move(out),
                [a, b, n, a_bcast, b_bcast, dfdx, dfdy](const double* g, Tape& tape) {
                  double* ga = grad_of(tape, a);
                  double* gb = grad_of(tape, b);
                  const auto av = a.data();
                  const auto bv = b.data();
                  for (std::size_t i = 0; i < n; ++i) {
                    const std::size_t ia = a_bcast ? 0 : i;
                    const std::size_t ib = b_bcast ? 0 : i;
                    if (ga) ga[ia] += g[i] * dfdx(av[ia], bv[ib]);
                    if (gb) gb[ib] += g[i] * dfdy(av[ia], bv[ib]);
                  }
                });
}

// y = f(x) with derivative dfdx(x, y).
template <class F, class D>
Tensor unary(const Tensor& x, F f, D dfdx) {
  const std::size_t n = x.numel();
  const auto xv = x.data();
  Values out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(xv[i]);
  auto y = std::make_shared<const Values>(out);
  return finish(x.tape(), x.shape(), std::move(out), [x, y, dfdx](const double* g, Tape& tape) {
    double* gx = grad_of(tape, x);
    const auto xv = x.data();
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[i] * dfdx(xv[i], (*y)[i]);
  });
}

// Splits a shape around `axis` into outer × extent × inner.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void require_rank(const char* name, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank)
    throw DimensionError(std::string(name) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_str(t.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Tensor safe_div(const Tensor& a, const Tensor& b) {
  return binary(
      "safe_div", a, b, [](double x, double y) { return y != 0.0 ? x / y : 0.0; },
      [](double, double y) { return y != 0.0 ? 1.0 / y : 0.0; },
      [](double x, double y) { return y != 0.0 ? -x / (y * y) : 0.0; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary(
      "minimum", a, b, [](double x, double y) { return x <= y ? x : y; },
      [](double x, double y) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary(
      "maximum", a, b, [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

Tensor neg(const Tensor& x) {
  return unary(x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary(x, [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data())
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor clamp_min(const Tensor& x, double floor) {
  return unary(
      x, [floor](double v) { return v < floor ? floor : v; },
      [floor](double v, double) { return v < floor ? 0.0 : 1.0; });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return finish(x.tape(), {}, {total}, [x](const double* g, Tape& tape) {
    double* gx = grad_of(tape, x);
    for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  Values out(x.data().begin(), x.data().end());
  return finish(x.tape(), std::move(shape), std::move(out), [x](const double* g, Tape& tape) {
    double* gx = grad_of(tape, x);
    for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g[i];
  });
}

Tensor transpose(const Tensor& x) {
  require_rank("transpose", x, 2);
  const std::size_t m = x.dim(0);
  const std::size_t n = x.dim(1);
  const auto xv = x.data();
  Values out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
  return finish(x.tape(), {n, m}, std::move(out), [x, m, n](const double* g, Tape& tape) {
    double* gx = grad_of(tape, x);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[j * m + i];
  });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no operands");
  const Shape& first = parts[0].shape();
  if (axis >= first.size())
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(first));
  Shape shape = first;
  shape[axis] = 0;
  Tape* tape = nullptr;
  for (const Tensor& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != first.size())
      throw DimensionError("concat: rank mismatch " + pair_str(parts[0], p));
    probe[axis] = first[axis];
    if (probe != first) throw DimensionError("concat: incompatible shapes " + pair_str(parts[0], p));
    shape[axis] += p.shape()[axis];
    if (p.tape() && tape && p.tape() != tape)
      throw ContractError("operands are recorded on different tapes");
    if (p.tape()) tape = p.tape();
  }

  const AxisSplit out_split = split_at(shape, axis);
  Values out(shape_numel(shape));
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    const std::size_t block = p.shape()[axis] * out_split.inner;
    const auto pv = p.data();
    for (std::size_t o = 0; o < out_split.outer; ++o)
      std::copy_n(pv.begin() + o * block, block,
                  out.begin() + o * out_split.extent * out_split.inner + offset);
    offset += block;
  }
  std::vector<Tensor> kept(parts.begin(), parts.end());
  return finish(tape, std::move(shape), std::move(out),
                [kept, offsets, out_split, axis](const double* g, Tape& tape) {
                  for (std::size_t k = 0; k < kept.size(); ++k) {
                    double* gp = grad_of(tape, kept[k]);
                    if (!gp) continue;
                    const std::size_t block = kept[k].shape()[axis] * out_split.inner;
                    for (std::size_t o = 0; o < out_split.outer; ++o) {
                      const double* src = g + o * out_split.extent * out_split.inner + offsets[k];
                      for (std::size_t i = 0; i < block; ++i) gp[o * block + i] += src[i];
                    }
                  }
                });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= x.rank() || begin > end || end > x.shape()[axis])
    throw DimensionError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") on axis " + std::to_string(axis) + " invalid for " +
                         shape_str(x.shape()));
  const AxisSplit in = split_at(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = end - begin;
  const std::size_t block = (end - begin) * in.inner;
  const auto xv = x.data();
  Values out(in.outer * block);
  for (std::size_t o = 0; o < in.outer; ++o)
    std::copy_n(xv.begin() + (o * in.extent + begin) * in.inner, block, out.begin() + o * block);
  return finish(x.tape(), std::move(shape), std::move(out),
                [x, in, begin, block](const double* g, Tape& tape) {
                  double* gx = grad_of(tape, x);
                  for (std::size_t o = 0; o < in.outer; ++o) {
                    double* dst = gx + (o * in.extent + begin) * in.inner;
                    for (std::size_t i = 0; i < block; ++i) dst[i] += g[o * block + i];
                  }
                });
}

Tensor gather(const Tensor& x, std::span<const std::size_t> flat_indices) {
  std::vector<std::size_t> idx(flat_indices.begin(), flat_indices.end());
  const auto xv = x.data();
  Values out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.numel())
      throw DimensionError("gather: index " + std::to_string(idx[i]) + " out of range for " +
                           shape_str(x.shape()));
    out[i] = xv[idx[i]];
  }
  return finish(x.tape(), {idx.size()}, std::move(out), [x, idx](const double* g, Tape& tape) {
    double* gx = grad_of(tape, x);
    for (std::size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += g[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: cannot multiply " + pair_str(a, b));
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.dim(1);
  Values out(m * n, 0.0);
  simd::gemm(a.data().data(), b.data().data(), out.data(), m, k, n);
  return finish(common_tape({&a, &b}), {m, n}, std::move(out),
                [a, b, m, k, n](const double* g, Tape& tape) {
                  if (double* ga = grad_of(tape, a))
                    simd::gemm_nt(g, b.data().data(), ga, m, k, n);
                  if (double* gb = grad_of(tape, b))
                    simd::gemm_tn(a.data().data(), g, gb, m, k, n);
                });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() == 0 || bias.rank() != 1 || bias.dim(0) != x.shape().back())
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match " +
                         shape_str(x.shape()));
  const std::size_t n = bias.dim(0);
  const std::size_t rows = n ? x.numel() / n : 0;
  const auto xv = x.data();
  const auto bv = bias.data();
  Values out(x.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = xv[r * n + j] + bv[j];
  return finish(common_tape({&x, &bias}), x.shape(), std::move(out),
                [x, bias, rows, n](const double* g, Tape& tape) {
                  if (double* gx = grad_of(tape, x))
                    for (std::size_t i = 0; i < rows * n; ++i) gx[i] += g[i];
                  if (double* gb = grad_of(tape, bias))
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
                });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() == 0 || bias.rank() != 1 || bias.dim(0) != x.dim(0))
    throw DimensionError("add_channel_bias: bias " + shape_str(bias.shape()) +
                         " does not match " + shape_str(x.shape()));
  const std::size_t c = bias.dim(0);
  const std::size_t inner = c ? x.numel() / c : 0;
  const auto xv = x.data();
  const auto bv = bias.data();
  Values out(x.numel());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < inner; ++i) out[ch * inner + i] = xv[ch * inner + i] + bv[ch];
  return finish(common_tape({&x, &bias}), x.shape(), std::move(out),
                [x, bias, c, inner](const double* g, Tape& tape) {
                  if (double* gx = grad_of(tape, x))
                    for (std::size_t i = 0; i < c * inner; ++i) gx[i] += g[i];
                  if (double* gb = grad_of(tape, bias))
                    for (std::size_t ch = 0; ch < c; ++ch)
                      for (std::size_t i = 0; i < inner; ++i) gb[ch] += g[ch * inner + i];
                });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank())
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
  const AxisSplit s = split_at(x.shape(), axis);
  const auto xv = x.data();
  Values out(x.numel());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double peak = xv[base];
      for (std::size_t e = 1; e < s.extent; ++e) peak = std::max(peak, xv[base + e * s.inner]);
      double total = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const double v = std::exp(xv[base + e * s.inner] - peak);
        out[base + e * s.inner] = v;
        total += v;
      }
      for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] /= total;
    }
  }
  auto y = std::make_shared<const Values>(out);
  return finish(x.tape(), x.shape(), std::move(out), [x, y, s](const double* g, Tape& tape) {
    double* gx = grad_of(tape, x);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.extent * s.inner + in;
        double weighted = 0.0;
        for (std::size_t e = 0; e < s.extent; ++e)
          weighted += g[base + e * s.inner] * (*y)[base + e * s.inner];
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t i = base + e * s.inner;
          gx[i] += (*y)[i] * (g[i] - weighted);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, double eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t n = x.shape().back();
  const std::size_t rows = n ? x.numel() / n : 0;
  const auto xv = x.data();
  Values out(x.numel());
  auto inv_std = std::make_shared<Values>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = (row[j] - mu) * inv;
  }
  auto y = std::make_shared<const Values>(out);
  return finish(x.tape(), x.shape(), std::move(out),
                [x, y, inv_std, rows, n](const double* g, Tape& tape) {
                  double* gx = grad_of(tape, x);
                  const double inv_n = 1.0 / static_cast<double>(n);
                  for (std::size_t r = 0; r < rows; ++r) {
                    const double* gr = g + r * n;
                    const double* yr = y->data() + r * n;
                    double g_mean = 0.0;
                    double gy_mean = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                      g_mean += gr[j];
                      gy_mean += gr[j] * yr[j];
                    }
                    g_mean *= inv_n;
                    gy_mean *= inv_n;
                    for (std::size_t j = 0; j < n; ++j)
                      gx[r * n + j] += (*inv_std)[r] * (gr[j] - g_mean - yr[j] * gy_mean);
                  }
                });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank("conv2d input", x, 3);
  require_rank("conv2d weight", weight, 4);
  const std::size_t cin = x.dim(0);
  const std::size_t h = x.dim(1);
  const std::size_t w = x.dim(2);
  const std::size_t cout = weight.dim(0);
  const std::size_t kh = weight.dim(2);
  const std::size_t kw = weight.dim(3);
  if (weight.dim(1) != cin || bias.rank() != 1 || bias.dim(0) != cout)
    throw DimensionError("conv2d: weight " + shape_str(weight.shape()) + " / bias " +
                         shape_str(bias.shape()) + " do not fit input " + shape_str(x.shape()));
  if (stride == 0 || h + 2 * padding < kh || w + 2 * padding < kw)
    throw DimensionError("conv2d: kernel larger than padded input " + shape_str(x.shape()));
  const std::size_t ho = (h + 2 * padding - kh) / stride + 1;
  const std::size_t wo = (w + 2 * padding - kw) / stride + 1;
  const std::size_t patch = cin * kh * kw;
  const std::size_t pixels = ho * wo;

  // Unfold input patches into columns: cols[patch × pixels].
  auto cols = std::make_shared<Values>(patch * pixels, 0.0);
  const auto xv = x.data();
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t ky = 0; ky < kh; ++ky)
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const std::size_t row = (c * kh + ky) * kw + kx;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                      static_cast<std::ptrdiff_t>(padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            (*cols)[row * pixels + oy * wo + ox] = xv[(c * h + iy) * w + ix];
          }
        }
      }

  Values out(cout * pixels, 0.0);
  simd::gemm(weight.data().data(), cols->data(), out.data(), cout, patch, pixels);
  const auto bv = bias.data();
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t p = 0; p < pixels; ++p) out[o * pixels + p] += bv[o];

  return finish(
      common_tape({&x, &weight, &bias}), {cout, ho, wo}, std::move(out),
      [=](const double* g, Tape& tape) {
        if (double* gw = grad_of(tape, weight)) simd::gemm_nt(g, cols->data(), gw, cout, patch, pixels);
        if (double* gb = grad_of(tape, bias))
          for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t p = 0; p < pixels; ++p) gb[o] += g[o * pixels + p];
        double* gx = grad_of(tape, x);
        if (!gx) return;
        Values gcols(patch * pixels, 0.0);
        simd::gemm_tn(weight.data().data(), g, gcols.data(), cout, patch, pixels);
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t ky = 0; ky < kh; ++ky)
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::size_t row = (c * kh + ky) * kw + kx;
              for (std::size_t oy = 0; oy < ho; ++oy) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                          static_cast<std::ptrdiff_t>(padding);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t ox = 0; ox < wo; ++ox) {
                  const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                            static_cast<std::ptrdiff_t>(padding);
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                  gx[(c * h + iy) * w + ix] += gcols[row * pixels + oy * wo + ox];
                }
              }
            }
      });
}

}  // namespace reldet::numeric
