#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sean/diff/tensor.hpp"

namespace sean::diff {

using Rng = std::mt19937_64;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Learnable tensor with U(-bound, bound) entries.
auto uniform_parameter(Shape shape, double bound, Rng& rng) -> Tensor;
// sqrt(6 / (fan_in + fan_out))
auto glorot_bound(std::size_t fan_in, std::size_t fan_out) -> double;
auto zero_parameter(Shape shape) -> Tensor;

// Affine map y = W x + b, W of shape (out, in).
struct Linear {
  Tensor weight;
  Tensor bias;

  static auto init(std::size_t in, std::size_t out, Rng& rng) -> Linear;
  auto forward(const Tensor& x) const -> Tensor;
  auto in_features() const -> std::size_t { return weight.dim(1); }
  auto out_features() const -> std::size_t { return weight.dim(0); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// Standard LSTM cell with gate blocks ordered (input, forget, candidate,
// output):
//   [i f g o] = W_x x + W_h h + b
//   c' = sigmoid(f) * c + sigmoid(i) * tanh(g)
//   h' = sigmoid(o) * tanh(c')
struct LstmParams {
  Tensor input_weight;   // (4d, in)
  Tensor hidden_weight;  // (4d, d)
  Tensor bias;           // (4d)

  static auto init(std::size_t in, std::size_t hidden, Rng& rng) -> LstmParams;
  auto hidden_size() const -> std::size_t { return hidden_weight.dim(1); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct LstmOutput {
  Tensor h;
  Tensor c;
};

auto lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_in,
               const LstmParams& p) -> LstmOutput;

// phi(dt) = cos(dt * scale * omega + phase). `scale` is a fixed normaliser
// (1 / t_max of the training split once known), not a parameter.
struct TimeEncoderParams {
  Tensor omega;
  Tensor phase;
  double scale = 1.0;

  static auto init(std::size_t dim, Rng& rng) -> TimeEncoderParams;
  auto dim() const -> std::size_t { return omega.numel(); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// Single interval -> (d). Throws std::invalid_argument on negative input.
auto time_encode(double delta_t, const TimeEncoderParams& p) -> Tensor;
// One row per interval -> (n, d).
auto time_encode(std::span<const double> deltas, const TimeEncoderParams& p)
    -> Tensor;

}  // namespace sean::diff
