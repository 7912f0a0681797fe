#include "sean/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>

namespace sean::diff {

namespace {

auto tracking_tape(std::initializer_list<const Tensor*> inputs) -> Tape* {
  Tape* tape = active_tape();
  if (tape == nullptr) {
    return nullptr;
  }
  for (const auto* t : inputs) {
    if (t->defined() && t->requires_grad()) {
      return tape;
    }
  }
  return nullptr;
}

void require_defined(const char* op, const Tensor& t) {
  if (!t.defined()) {
    throw ShapeError(std::string(op) + ": undefined tensor argument");
  }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  require_defined(op, a);
  require_defined(op, b);
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

auto last_dim(const Tensor& t) -> std::size_t {
  return t.rank() == 0 ? 1 : t.shape().back();
}

// Elementwise map with derivative d(x, y) = dy/dx evaluated at input x and
// output y.
template <class Fwd, class Deriv>
auto unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) -> Tensor {
  require_defined(op, a);
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = fwd(x[i]);
  }
  auto result = Tensor::from(a.shape(), std::move(out));
  if (Tape* tape = tracking_tape({&a})) {
    result.set_requires_grad(true);
    tape->record(result.impl(), [ai = a.impl(), oi = result.impl(), deriv] {
      auto& g = ai->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += oi->grad[i] * deriv(ai->data[i], oi->data[i]);
      }
    });
  }
  return result;
}

template <class Fwd, class DerivA, class DerivB>
auto binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd,
            DerivA da, DerivB db) -> Tensor {
  require_same_shape(op, a, b);
  std::vector<double> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = fwd(x[i], y[i]);
  }
  auto result = Tensor::from(a.shape(), std::move(out));
  if (Tape* tape = tracking_tape({&a, &b})) {
    result.set_requires_grad(true);
    tape->record(result.impl(), [ai = a.impl(), bi = b.impl(),
                                 oi = result.impl(), da, db] {
      if (ai->requires_grad) {
        auto& g = ai->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
          g[i] += oi->grad[i] * da(ai->data[i], bi->data[i]);
        }
      }
      if (bi->requires_grad) {
        auto& g = bi->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
          g[i] += oi->grad[i] * db(ai->data[i], bi->data[i]);
        }
      }
    });
  }
  return result;
}

// C(m,n) += A(m,k) B(k,n), all row-major.
void gemm(const double* a, const double* b, double* c, std::size_t m,
          std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) {
        continue;
      }
      const double* brow = b + p * n;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
}

}  // namespace

auto add(const Tensor& a, const Tensor& b) -> Tensor {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

auto sub(const Tensor& a, const Tensor& b) -> Tensor {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

auto mul(const Tensor& a, const Tensor& b) -> Tensor {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

auto scale(const Tensor& a, double factor) -> Tensor {
  return unary(
      "scale", a, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

auto add_scalar(const Tensor& a, double offset) -> Tensor {
  return unary(
      "add_scalar", a, [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

auto mul_scalar(const Tensor& a, const Tensor& gate) -> Tensor {
  require_defined("mul_scalar", a);
  require_defined("mul_scalar", gate);
  if (gate.numel() != 1) {
    throw ShapeError("mul_scalar: gate must have one element, got " +
                     shape_str(gate.shape()));
  }
  const double s = gate.item();
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.data()[i] * s;
  }
  auto result = Tensor::from(a.shape(), std::move(out));
  if (Tape* tape = tracking_tape({&a, &gate})) {
    result.set_requires_grad(true);
    tape->record(result.impl(),
                 [ai = a.impl(), gi = gate.impl(), oi = result.impl()] {
                   const double s = gi->data[0];
                   if (ai->requires_grad) {
                     auto& g = ai->ensure_grad();
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       g[i] += oi->grad[i] * s;
                     }
                   }
                   if (gi->requires_grad) {
                     double acc = 0.0;
                     for (std::size_t i = 0; i < oi->grad.size(); ++i) {
                       acc += oi->grad[i] * ai->data[i];
                     }
                     gi->ensure_grad()[0] += acc;
                   }
                 });
  }
  return result;
}

auto matmul(const Tensor& a, const Tensor& b) -> Tensor {
  require_defined("matmul", a);
  require_defined("matmul", b);
  const auto bad = [&] {
    return ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                      " and " + shape_str(b.shape()));
  };
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t n = 0;
  Shape out_shape;
  if (a.rank() == 2 && b.rank() == 2) {
    m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) throw bad();
    out_shape = {m, n};
  } else if (a.rank() == 2 && b.rank() == 1) {
    m = a.dim(0), k = a.dim(1), n = 1;
    if (b.dim(0) != k) throw bad();
    out_shape = {m};
  } else if (a.rank() == 1 && b.rank() == 2) {
    m = 1, k = a.dim(0), n = b.dim(1);
    if (b.dim(0) != k) throw bad();
    out_shape = {n};
  } else {
    throw bad();
  }
  std::vector<double> out(m * n, 0.0);
  gemm(a.data().data(), b.data().data(), out.data(), m, k, n);
  auto result = Tensor::from(std::move(out_shape), std::move(out));
  if (Tape* tape = tracking_tape({&a, &b})) {
    result.set_requires_grad(true);
    tape->record(result.impl(), [ai = a.impl(), bi = b.impl(),
                                 oi = result.impl(), m, k, n] {
      const auto& dy = oi->grad;
      if (ai->requires_grad) {
        // dA(m,k) += dY(m,n) B^T
        auto& g = ai->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              acc += dy[i * n + j] * bi->data[p * n + j];
            }
            g[i * k + p] += acc;
          }
        }
      }
      if (bi->requires_grad) {
        // dB(k,n) += A^T dY
        auto& g = bi->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double av = ai->data[i * k + p];
            for (std::size_t j = 0; j < n; ++j) {
              g[p * n + j] += av * dy[i * n + j];
            }
          }
        }
      }
    });
  }
  return result;
}

auto linear(const Tensor& x, const Tensor& weight, const Tensor& bias)
    -> Tensor {
  require_defined("linear", x);
  require_defined("linear", weight);
  if (weight.rank() != 2 || x.rank() < 1 || x.rank() > 2 ||
      x.shape().back() != weight.dim(1) ||
      (bias.defined() &&
       (bias.rank() != 1 || bias.dim(0) != weight.dim(0)))) {
    throw ShapeError(
        "linear: incompatible shapes x" + shape_str(x.shape()) + " W" +
        shape_str(weight.shape()) + " b" +
        (bias.defined() ? shape_str(bias.shape()) : std::string("()")));
  }
  const std::size_t rows = x.rank() == 1 ? 1 : x.dim(0);
  const std::size_t in = weight.dim(1);
  const std::size_t outd = weight.dim(0);
  std::vector<double> out(rows * outd);
  const double* xd = x.data().data();
  const double* wd = weight.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < outd; ++o) {
      double acc = bias.defined() ? bias.data()[o] : 0.0;
      const double* wrow = wd + o * in;
      const double* xrow = xd + r * in;
      for (std::size_t i = 0; i < in; ++i) {
        acc += wrow[i] * xrow[i];
      }
      out[r * outd + o] = acc;
    }
  }
  Shape shape = x.rank() == 1 ? Shape{outd} : Shape{rows, outd};
  auto result = Tensor::from(std::move(shape), std::move(out));
  if (Tape* tape = tracking_tape({&x, &weight, &bias})) {
    result.set_requires_grad(true);
    tape->record(result.impl(), [xi = x.impl(), wi = weight.impl(),
                                 bi = bias.impl(), oi = result.impl(), rows,
                                 in, outd] {
      const auto& dy = oi->grad;
      if (xi->requires_grad) {
        auto& g = xi->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t o = 0; o < outd; ++o) {
            const double d = dy[r * outd + o];
            if (d == 0.0) continue;
            const double* wrow = wi->data.data() + o * in;
            for (std::size_t i = 0; i < in; ++i) {
              g[r * in + i] += d * wrow[i];
            }
          }
        }
      }
      if (wi->requires_grad) {
        auto& g = wi->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t o = 0; o < outd; ++o) {
            const double d = dy[r * outd + o];
            if (d == 0.0) continue;
            const double* xrow = xi->data.data() + r * in;
            for (std::size_t i = 0; i < in; ++i) {
              g[o * in + i] += d * xrow[i];
            }
          }
        }
      }
      if (bi && bi->requires_grad) {
        auto& g = bi->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t o = 0; o < outd; ++o) {
            g[o] += dy[r * outd + o];
          }
        }
      }
    });
  }
  return result;
}

auto concat(std::span<const Tensor> parts) -> Tensor {
  if (parts.empty()) {
    throw ShapeError("concat: no inputs");
  }
  for (const auto& p : parts) require_defined("concat", p);
  const auto& first = parts.front().shape();
  const std::size_t rows = parts.front().numel() / last_dim(parts.front());
  std::size_t width = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != first.size() ||
        !std::equal(s.begin(), s.end() - 1, first.begin())) {
      throw ShapeError("concat: leading dims differ " + shape_str(first) +
                       " vs " + shape_str(s));
    }
    width += last_dim(p);
  }
  std::vector<double> out(rows * width);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = last_dim(p);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(p.data().data() + r * w, w, out.data() + r * width + offset);
    }
    offset += w;
  }
  Shape shape = first;
  shape.back() = width;
  auto result = Tensor::from(std::move(shape), std::move(out));
  Tape* tape = active_tape();
  bool track = false;
  for (const auto& p : parts) track = track || p.requires_grad();
  if (tape != nullptr && track) {
    result.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    inputs.reserve(parts.size());
    for (const auto& p : parts) inputs.push_back(p.impl());
    tape->record(result.impl(), [inputs = std::move(inputs),
                                 oi = result.impl(), rows, width] {
      std::size_t offset = 0;
      for (const auto& in : inputs) {
        const std::size_t w = in->shape.empty() ? 1 : in->shape.back();
        if (in->requires_grad) {
          auto& g = in->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
              g[r * w + c] += oi->grad[r * width + offset + c];
            }
          }
        }
        offset += w;
      }
    });
  }
  return result;
}

auto stack_rows(std::span<const Tensor> rows) -> Tensor {
  if (rows.empty()) {
    throw ShapeError("stack_rows: no rows");
  }
  const std::size_t d = rows.front().numel();
  for (const auto& r : rows) {
    require_defined("stack_rows", r);
    if (r.rank() != 1 || r.numel() != d) {
      throw ShapeError("stack_rows: expected vectors of length " +
                       std::to_string(d) + ", got " + shape_str(r.shape()));
    }
  }
  std::vector<double> out;
  out.reserve(rows.size() * d);
  bool track = false;
  for (const auto& r : rows) {
    out.insert(out.end(), r.data().begin(), r.data().end());
    track = track || r.requires_grad();
  }
  auto result = Tensor::from({rows.size(), d}, std::move(out));
  Tape* tape = active_tape();
  if (tape != nullptr && track) {
    result.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    inputs.reserve(rows.size());
    for (const auto& r : rows) inputs.push_back(r.impl());
    tape->record(result.impl(),
                 [inputs = std::move(inputs), oi = result.impl(), d] {
                   for (std::size_t r = 0; r < inputs.size(); ++r) {
                     if (!inputs[r]->requires_grad) continue;
                     auto& g = inputs[r]->ensure_grad();
                     for (std::size_t c = 0; c < d; ++c) {
                       g[c] += oi->grad[r * d + c];
                     }
                   }
                 });
  }
  return result;
}

auto slice(const Tensor& a, std::size_t begin, std::size_t end) -> Tensor {
  require_defined("slice", a);
  const std::size_t w = last_dim(a);
  if (begin > end || end > w) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") invalid for shape " +
                     shape_str(a.shape()));
  }
  const std::size_t rows = a.numel() / w;
  const std::size_t n = end - begin;
  std::vector<double> out(rows * n);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().data() + r * w + begin, n, out.data() + r * n);
  }
  Shape shape = a.shape();
  shape.back() = n;
  auto result = Tensor::from(std::move(shape), std::move(out));
  if (Tape* tape = tracking_tape({&a})) {
    result.set_requires_grad(true);
    tape->record(result.impl(),
                 [ai = a.impl(), oi = result.impl(), rows, w, n, begin] {
                   auto& g = ai->ensure_grad();
                   for (std::size_t r = 0; r < rows; ++r) {
                     for (std::size_t c = 0; c < n; ++c) {
                       g[r * w + begin + c] += oi->grad[r * n + c];
                     }
                   }
                 });
  }
  return result;
}

auto reshape(const Tensor& a, Shape shape) -> Tensor {
  require_defined("reshape", a);
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  auto result = Tensor::from(std::move(shape), std::move(out));
  if (Tape* tape = tracking_tape({&a})) {
    result.set_requires_grad(true);
    tape->record(result.impl(), [ai = a.impl(), oi = result.impl()] {
      auto& g = ai->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
    });
  }
  return result;
}

auto softmax(const Tensor& a) -> Tensor {
  require_defined("softmax", a);
  const std::size_t w = last_dim(a);
  if (w == 0) {
    throw ShapeError("softmax: empty last dimension");
  }
  const std::size_t rows = a.numel() / w;
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.data().data() + r * w;
    double* y = out.data() + r * w;
    const double mx = *std::max_element(x, x + w);
    double total = 0.0;
    for (std::size_t c = 0; c < w; ++c) {
      y[c] = std::exp(x[c] - mx);
      total += y[c];
    }
    for (std::size_t c = 0; c < w; ++c) y[c] /= total;
  }
  auto result = Tensor::from(a.shape(), std::move(out));
  if (Tape* tape = tracking_tape({&a})) {
    result.set_requires_grad(true);
    tape->record(result.impl(), [ai = a.impl(), oi = result.impl(), rows, w] {
      auto& g = ai->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = oi->data.data() + r * w;
        const double* dy = oi->grad.data() + r * w;
        double dot = 0.0;
        for (std::size_t c = 0; c < w; ++c) dot += dy[c] * y[c];
        for (std::size_t c = 0; c < w; ++c) {
          g[r * w + c] += y[c] * (dy[c] - dot);
        }
      }
    });
  }
  return result;
}

auto tanh(const Tensor& a) -> Tensor {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

auto sigmoid(const Tensor& a) -> Tensor {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

auto relu(const Tensor& a) -> Tensor {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

auto exp(const Tensor& a) -> Tensor {
  return unary(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

auto log(const Tensor& a) -> Tensor {
  return unary(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

auto cos(const Tensor& a) -> Tensor {
  return unary(
      "cos", a, [](double x) { return std::cos(x); },
      [](double x, double) { return -std::sin(x); });
}

auto sum(const Tensor& a) -> Tensor {
  require_defined("sum", a);
  double total = 0.0;
  for (double v : a.data()) total += v;
  auto result = Tensor::scalar(total);
  if (Tape* tape = tracking_tape({&a})) {
    result.set_requires_grad(true);
    tape->record(result.impl(), [ai = a.impl(), oi = result.impl()] {
      auto& g = ai->ensure_grad();
      const double d = oi->grad[0];
      for (auto& v : g) v += d;
    });
  }
  return result;
}

auto mean(const Tensor& a) -> Tensor {
  require_defined("mean", a);
  if (a.numel() == 0) {
    throw ShapeError("mean: empty tensor");
  }
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

auto maximum(const Tensor& a, const Tensor& b) -> Tensor {
  return binary(
      "maximum", a, b, [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

auto clamp(const Tensor& a, double lo, double hi) -> Tensor {
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return x >= lo && x <= hi ? 1.0 : 0.0; });
}

auto ste_round(const Tensor& a) -> Tensor {
  return unary(
      "ste_round", a, [](double x) { return x >= 0.5 ? 1.0 : 0.0; },
      [](double, double) { return 1.0; });
}

auto hard_round(const Tensor& a) -> Tensor {
  return ste_round(detach(a));
}

auto detach(const Tensor& a) -> Tensor {
  require_defined("detach", a);
  return a.clone();
}

}  // namespace sean::diff
