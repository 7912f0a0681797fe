#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sean::diff {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  // Empty until a gradient first reaches this tensor.
  std::vector<double> grad;
  bool requires_grad = false;

  auto has_grad() const -> bool { return !grad.empty(); }
  auto ensure_grad() -> std::vector<double>& {
    if (grad.empty()) {
      grad.assign(data.size(), 0.0);
    }
    return grad;
  }
};

auto shape_str(const Shape& shape) -> std::string;
auto shape_numel(const Shape& shape) -> std::size_t;

// Dense row-major float64 array with shared ownership. Copies alias the same
// storage, the way parameters are shared between a model and its optimizer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static auto zeros(Shape shape) -> Tensor;
  static auto full(Shape shape, double value) -> Tensor;
  static auto from(Shape shape, std::vector<double> values) -> Tensor;
  static auto vector(std::vector<double> values) -> Tensor;
  static auto scalar(double value) -> Tensor;

  auto defined() const -> bool { return impl_ != nullptr; }
  auto shape() const -> const Shape& { return impl_->shape; }
  auto rank() const -> std::size_t { return impl_->shape.size(); }
  auto dim(std::size_t axis) const -> std::size_t;
  auto numel() const -> std::size_t { return impl_->data.size(); }

  auto data() const -> std::span<const double> { return impl_->data; }
  auto mutable_data() -> std::span<double> { return impl_->data; }
  // Zero-length span when no gradient has been accumulated.
  auto grad() const -> std::span<const double> { return impl_->grad; }

  auto item() const -> double;
  auto at(std::size_t i) const -> double { return impl_->data.at(i); }

  auto requires_grad() const -> bool { return impl_->requires_grad; }
  auto set_requires_grad(bool flag) -> Tensor&;
  void zero_grad() { impl_->grad.clear(); }

  // Deep copy with no gradient and no tape history.
  auto clone() const -> Tensor;

  auto impl() const -> const std::shared_ptr<TensorImpl>& { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Ordered record of differentiable operations. Entries are appended in
// evaluation order, so walking them backwards is a valid topological order.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(std::shared_ptr<TensorImpl> output, BackwardFn fn);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded backward closure once.
  // A tape can be consumed exactly once.
  void backward(const Tensor& loss);

  auto consumed() const -> bool { return consumed_; }
  auto size() const -> std::size_t { return entries_.size(); }

 private:
  struct Entry {
    std::shared_ptr<TensorImpl> output;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
  bool consumed_ = false;
};

// Installs a tape as the thread's recording target for its lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  auto operator=(const TapeScope&) -> TapeScope& = delete;

 private:
  Tape* previous_;
};

// Tape of the innermost live TapeScope on this thread, or nullptr.
auto active_tape() -> Tape*;

}  // namespace sean::diff
