#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sean/diff/tensor.hpp"

namespace sean::diff {

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  auto initialized() const -> bool { return !first_moment.empty(); }
};

auto adam_init(std::span<const Tensor> params, double lr) -> AdamState;

// One bias-corrected Adam update from each parameter's accumulated gradient.
// Parameters that received no gradient are treated as having gradient zero.
void adam_step(std::span<Tensor> params, AdamState& state);

void zero_grad(std::span<Tensor> params);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  double max_abs_error = 0.0;
  // Location and values of the worst coordinate.
  std::size_t worst_param = 0;
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares reverse-mode gradients of `loss_fn` with central differences.
// `loss_fn` must rebuild the loss from the current parameter values on every
// call. At most `max_coords_per_param` coordinates of each parameter are
// probed (all of them when 0), chosen by `seed`.
auto grad_check(const std::function<Tensor()>& loss_fn,
                std::span<Tensor> params, double eps,
                std::size_t max_coords_per_param = 0, std::uint64_t seed = 0)
    -> GradCheckResult;

auto relative_error(double analytic, double numeric) -> double;

}  // namespace sean::diff
