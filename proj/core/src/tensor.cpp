#include "sean/diff/tensor.hpp"

#include <sstream>

namespace sean::diff {

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

auto shape_str(const Shape& shape) -> std::string {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    out << (i ? "," : "") << shape[i];
  }
  out << ')';
  return out.str();
}

auto shape_numel(const Shape& shape) -> std::size_t {
  std::size_t n = 1;
  for (auto d : shape) {
    n *= d;
  }
  return n;
}

auto Tensor::zeros(Shape shape) -> Tensor { return full(std::move(shape), 0.0); }

auto Tensor::full(Shape shape, double value) -> Tensor {
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(shape_numel(shape), value);
  impl->shape = std::move(shape);
  return Tensor(std::move(impl));
}

auto Tensor::from(Shape shape, std::vector<double> values) -> Tensor {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("Tensor::from: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

auto Tensor::vector(std::vector<double> values) -> Tensor {
  Shape shape{values.size()};
  return from(std::move(shape), std::move(values));
}

auto Tensor::scalar(double value) -> Tensor { return from({1}, {value}); }

auto Tensor::dim(std::size_t axis) const -> std::size_t {
  if (axis >= rank()) {
    throw ShapeError("Tensor::dim: axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(shape()));
  }
  return impl_->shape[axis];
}

auto Tensor::item() const -> double {
  if (numel() != 1) {
    throw ShapeError("Tensor::item: expected one element, shape " +
                     shape_str(shape()));
  }
  return impl_->data[0];
}

auto Tensor::set_requires_grad(bool flag) -> Tensor& {
  impl_->requires_grad = flag;
  return *this;
}

auto Tensor::clone() const -> Tensor {
  return from(impl_->shape, impl_->data);
}

void Tape::record(std::shared_ptr<TensorImpl> output, BackwardFn fn) {
  if (consumed_) {
    throw TapeError("Tape::record: tape already consumed by backward()");
  }
  entries_.push_back({std::move(output), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) {
    throw TapeError("Tape::backward: tape already consumed");
  }
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("Tape::backward: loss must be a scalar, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : "<undefined>"));
  }
  bool on_tape = false;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output == loss.impl()) {
      on_tape = true;
      break;
    }
  }
  if (!on_tape) {
    throw TapeError("Tape::backward: loss was not produced on this tape");
  }
  consumed_ = true;
  loss.impl()->ensure_grad()[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->has_grad()) {
      it->fn();
    }
  }
  entries_.clear();
  entries_.shrink_to_fit();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

TapeScope::~TapeScope() { g_active_tape = previous_; }

auto active_tape() -> Tape* { return g_active_tape; }

}  // namespace sean::diff
