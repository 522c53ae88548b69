#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "reldet/numeric/tensor.hpp"

// Differentiable tensor operations. Each op records itself on the tape of its
// inputs when any input requires grad; with constant inputs it returns a
// constant. Mixing tensors from two different tapes is a ContractError.
//
// Binary elementwise ops accept identical shapes or a single-element operand
// (scalar broadcast); anything else is a DimensionError naming both shapes.
namespace reldet::numeric {

inline constexpr double kLayerNormEps = 1e-5;

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
/// a / b where b != 0, and 0 (with zero gradient) where b == 0.
Tensor safe_div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
/// Throws DomainError if any entry is <= 0.
Tensor log(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
/// max(x, floor); entries below the floor get zero gradient.
Tensor clamp_min(const Tensor& x, double floor);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
/// 2-D transpose.
Tensor transpose(const Tensor& x);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
/// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
/// 1-D tensor of x's entries at the given flat (row-major) indices.
Tensor gather(const Tensor& x, std::span<const std::size_t> flat_indices);

Tensor matmul(const Tensor& a, const Tensor& b);
/// x[..., n] + bias[n], bias repeated over all leading positions.
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// x[c, ...] + bias[c], bias repeated over trailing positions.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

/// Max-shifted softmax; each slice along `axis` sums to one.
Tensor softmax(const Tensor& x, std::size_t axis);
/// Normalizes each slice along the last axis to zero mean, unit variance.
Tensor layer_norm(const Tensor& x, double eps = kLayerNormEps);

/// x[Cin×H×W] * weight[Cout×Cin×K×K] + bias[Cout] with zero padding.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);

}  // namespace reldet::numeric
