#include "sean/diff/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "sean/diff/ops.hpp"

namespace sean::diff {

auto uniform_parameter(Shape shape, double bound, Rng& rng) -> Tensor {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(rng);
  auto t = Tensor::from(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  return t;
}

auto glorot_bound(std::size_t fan_in, std::size_t fan_out) -> double {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

auto zero_parameter(Shape shape) -> Tensor {
  auto t = Tensor::zeros(std::move(shape));
  t.set_requires_grad(true);
  return t;
}

auto Linear::init(std::size_t in, std::size_t out, Rng& rng) -> Linear {
  Linear l;
  l.weight = uniform_parameter({out, in}, glorot_bound(in, out), rng);
  l.bias = uniform_parameter({out}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  return l;
}

auto Linear::forward(const Tensor& x) const -> Tensor {
  return linear(x, weight, bias);
}

void Linear::collect(const std::string& prefix,
                     std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

auto LstmParams::init(std::size_t in, std::size_t hidden, Rng& rng)
    -> LstmParams {
  LstmParams p;
  p.input_weight = uniform_parameter({4 * hidden, in}, glorot_bound(in, hidden), rng);
  p.hidden_weight =
      uniform_parameter({4 * hidden, hidden}, glorot_bound(hidden, hidden), rng);
  p.bias = uniform_parameter(
      {4 * hidden}, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  return p;
}

void LstmParams::collect(const std::string& prefix,
                         std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".input_weight", input_weight});
  out.push_back({prefix + ".hidden_weight", hidden_weight});
  out.push_back({prefix + ".bias", bias});
}

auto lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_in,
               const LstmParams& p) -> LstmOutput {
  const std::size_t d = p.hidden_size();
  if (h_prev.rank() != 1 || h_prev.numel() != d || c_in.rank() != 1 ||
      c_in.numel() != d) {
    throw ShapeError("lstm_cell: state shapes h" + shape_str(h_prev.shape()) +
                     " c" + shape_str(c_in.shape()) + " do not match hidden " +
                     std::to_string(d));
  }
  const auto gates = add(linear(x, p.input_weight, p.bias),
                         linear(h_prev, p.hidden_weight, Tensor{}));
  const auto i = sigmoid(slice(gates, 0, d));
  const auto f = sigmoid(slice(gates, d, 2 * d));
  const auto g = tanh(slice(gates, 2 * d, 3 * d));
  const auto o = sigmoid(slice(gates, 3 * d, 4 * d));
  auto c = add(mul(f, c_in), mul(i, g));
  auto h = mul(o, tanh(c));
  return {std::move(h), std::move(c)};
}

auto TimeEncoderParams::init(std::size_t dim, Rng& rng) -> TimeEncoderParams {
  // Log-spaced frequencies spanning several decades of the normalised
  // interval, as in the usual harmonic time encoders.
  TimeEncoderParams p;
  std::vector<double> omega(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const double frac = dim > 1 ? static_cast<double>(i) / (dim - 1) : 0.0;
    omega[i] = std::pow(10.0, 2.0 - 3.0 * frac);
  }
  p.omega = Tensor::vector(std::move(omega));
  p.omega.set_requires_grad(true);
  p.phase = uniform_parameter({dim}, 0.1, rng);
  return p;
}

void TimeEncoderParams::collect(const std::string& prefix,
                                std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".omega", omega});
  out.push_back({prefix + ".phase", phase});
}

auto time_encode(double delta_t, const TimeEncoderParams& p) -> Tensor {
  const double one[] = {delta_t};
  return reshape(time_encode(std::span<const double>(one), p), {p.dim()});
}

auto time_encode(std::span<const double> deltas, const TimeEncoderParams& p)
    -> Tensor {
  const std::size_t n = deltas.size();
  const std::size_t d = p.dim();
  std::vector<double> scaled(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (!(deltas[r] >= 0.0)) {
      throw std::invalid_argument(
          "time_encode: negative time interval " + std::to_string(deltas[r]) +
          " (query reached into the future)");
    }
    scaled[r] = deltas[r] * p.scale;
  }
  std::vector<double> out(n * d);
  const auto om = p.omega.data();
  const auto ph = p.phase.data();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      out[r * d + c] = std::cos(scaled[r] * om[c] + ph[c]);
    }
  }
  auto result = Tensor::from({n, d}, std::move(out));
  Tape* tape = active_tape();
  if (tape != nullptr && (p.omega.requires_grad() || p.phase.requires_grad())) {
    result.set_requires_grad(true);
    tape->record(result.impl(), [oi = result.impl(), wi = p.omega.impl(),
                                 bi = p.phase.impl(),
                                 scaled = std::move(scaled), n, d] {
      std::vector<double>* gw = wi->requires_grad ? &wi->ensure_grad() : nullptr;
      std::vector<double>* gb = bi->requires_grad ? &bi->ensure_grad() : nullptr;
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
          const double dy = oi->grad[r * d + c];
          if (dy == 0.0) continue;
          const double s = -std::sin(scaled[r] * wi->data[c] + bi->data[c]);
          if (gw) (*gw)[c] += dy * s * scaled[r];
          if (gb) (*gb)[c] += dy * s;
        }
      }
    });
  }
  return result;
}

}  // namespace sean::diff
