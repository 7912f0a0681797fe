#pragma once

#include <span>
#include <vector>

#include "sean/diff/tensor.hpp"

// Differentiable primitives. Every op records itself on the active tape when
// at least one input requires a gradient; otherwise it is a plain evaluation.
// Shape mismatches throw ShapeError naming the op and the offending shapes.
namespace sean::diff {

auto add(const Tensor& a, const Tensor& b) -> Tensor;
auto sub(const Tensor& a, const Tensor& b) -> Tensor;
auto mul(const Tensor& a, const Tensor& b) -> Tensor;

auto scale(const Tensor& a, double factor) -> Tensor;
auto add_scalar(const Tensor& a, double offset) -> Tensor;
// Multiplies every element of `a` by the single element of `gate`.
auto mul_scalar(const Tensor& a, const Tensor& gate) -> Tensor;

// (m,k)x(k,n) -> (m,n); (m,k)x(k) -> (m); (k)x(k,n) -> (n).
auto matmul(const Tensor& a, const Tensor& b) -> Tensor;
// x W^T + b for x of shape (in) or (rows, in), W (out, in), b (out) or
// undefined.
auto linear(const Tensor& x, const Tensor& weight, const Tensor& bias) -> Tensor;

auto concat(std::span<const Tensor> parts) -> Tensor;
auto stack_rows(std::span<const Tensor> rows) -> Tensor;
// Half-open slice [begin, end) of the last dimension.
auto slice(const Tensor& a, std::size_t begin, std::size_t end) -> Tensor;
auto reshape(const Tensor& a, Shape shape) -> Tensor;

auto softmax(const Tensor& a) -> Tensor;
auto tanh(const Tensor& a) -> Tensor;
auto sigmoid(const Tensor& a) -> Tensor;
auto relu(const Tensor& a) -> Tensor;
auto exp(const Tensor& a) -> Tensor;
auto log(const Tensor& a) -> Tensor;
auto cos(const Tensor& a) -> Tensor;

auto sum(const Tensor& a) -> Tensor;
auto mean(const Tensor& a) -> Tensor;

// Elementwise max; ties send the gradient to `a`.
auto maximum(const Tensor& a, const Tensor& b) -> Tensor;
// Gradient passes where lo <= a <= hi, zero outside.
auto clamp(const Tensor& a, double lo, double hi) -> Tensor;

// Forward: 1 where a >= 0.5 else 0. Backward: identity.
auto ste_round(const Tensor& a) -> Tensor;
// Same forward as ste_round but cut from the tape.
auto hard_round(const Tensor& a) -> Tensor;

auto detach(const Tensor& a) -> Tensor;

}  // namespace sean::diff
