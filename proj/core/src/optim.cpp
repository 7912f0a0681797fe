#include "sean/diff/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace sean::diff {

auto adam_init(std::span<const Tensor> params, double lr) -> AdamState {
  AdamState state;
  state.lr = lr;
  state.first_moment.reserve(params.size());
  state.second_moment.reserve(params.size());
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.numel(), 0.0);
    state.second_moment.emplace_back(p.numel(), 0.0);
  }
  return state;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (!state.initialized() || state.first_moment.size() != params.size()) {
    throw std::logic_error("adam_step: state not initialised for " +
                           std::to_string(params.size()) + " parameters");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    if (m.size() != params[k].numel()) {
      throw ShapeError("adam_step: moment shape mismatch for parameter " +
                       std::to_string(k));
    }
    const auto grad = params[k].grad();
    auto data = params[k].mutable_data();
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      data[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

void zero_grad(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

auto relative_error(double analytic, double numeric) -> double {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

auto grad_check(const std::function<Tensor()>& loss_fn,
                std::span<Tensor> params, double eps,
                std::size_t max_coords_per_param, std::uint64_t seed)
    -> GradCheckResult {
  zero_grad(params);
  {
    Tape tape;
    TapeScope scope(tape);
    const Tensor loss = loss_fn();
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    const auto g = p.grad();
    analytic.emplace_back(p.numel(), 0.0);
    std::copy(g.begin(), g.end(), analytic.back().begin());
  }
  zero_grad(params);

  std::mt19937_64 rng(seed);
  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::vector<std::size_t> coords(params[k].numel());
    std::iota(coords.begin(), coords.end(), 0);
    if (max_coords_per_param != 0 && coords.size() > max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords_per_param);
    }
    auto data = params[k].mutable_data();
    for (auto i : coords) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double up = loss_fn().item();
      data[i] = saved - eps;
      const double down = loss_fn().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic[k][i], numeric);
      result.max_abs_error =
          std::max(result.max_abs_error, std::fabs(analytic[k][i] - numeric));
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = k;
        result.worst_coord = i;
        result.worst_analytic = analytic[k][i];
        result.worst_numeric = numeric;
      }
      result.coordinates += 1;
    }
  }
  return result;
}

}  // namespace sean::diff
