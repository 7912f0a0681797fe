#include <cmath>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "sean/diff/checkpoint.hpp"
#include "sean/diff/nn.hpp"
#include "sean/diff/ops.hpp"
#include "sean/diff/optim.hpp"

namespace sean::diff {
namespace {

auto param(Shape shape, std::vector<double> values) -> Tensor {
  auto t = Tensor::from(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  return t;
}

auto random_param(Shape shape, std::mt19937_64& rng, double lo = -1.0,
                  double hi = 1.0) -> Tensor {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return param(std::move(shape), std::move(v));
}

auto sigmoid_ref(double x) -> double { return 1.0 / (1.0 + std::exp(-x)); }

TEST(Tensor, FromRejectsWrongElementCount) {
  EXPECT_THROW(Tensor::from({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST(Tensor, ItemRequiresSingleElement) {
  EXPECT_EQ(Tensor::scalar(4.5).item(), 4.5);
  EXPECT_THROW(Tensor::zeros({2}).item(), ShapeError);
}

TEST(Tensor, CloneIsDeepAndDetached) {
  auto a = param({2}, {1.0, 2.0});
  auto b = a.clone();
  b.mutable_data()[0] = 9.0;
  EXPECT_EQ(a.at(0), 1.0);
  EXPECT_FALSE(b.requires_grad());
}

TEST(Ops, SoftmaxOfEqualLogitsIsUniform) {
  const auto s = softmax(Tensor::vector({0.0, 0.0}));
  EXPECT_EQ(s.at(0), 0.5);
  EXPECT_EQ(s.at(1), 0.5);
}

TEST(Ops, SoftmaxSumsToOneAndIsShiftInvariant) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(1 + trial % 9);
    for (auto& x : v) x = n(rng);
    const auto s = softmax(Tensor::vector(v));
    double total = 0.0;
    for (double p : s.data()) {
      EXPECT_GE(p, 0.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (auto& x : v) x += 17.25;
    const auto shifted = softmax(Tensor::vector(v));
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_NEAR(shifted.at(i), s.at(i), 1e-12);
    }
  }
}

TEST(Ops, MatmulByIdentityReturnsInput) {
  const auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  const auto x = Tensor::vector({3.5, -2.0});
  const auto y = matmul(eye, x);
  EXPECT_EQ(y.at(0), 3.5);
  EXPECT_EQ(y.at(1), -2.0);
}

TEST(Ops, ShapeMismatchNamesOpAndShapes) {
  try {
    add(Tensor::zeros({2}), Tensor::zeros({3}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("add"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(2)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(3)"), std::string::npos) << msg;
  }
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2})), ShapeError);
}

TEST(Autodiff, TanhDerivativeAtZeroIsOne) {
  auto x = param({1}, {0.0});
  Tape tape;
  {
    TapeScope scope(tape);
    auto y = sum(tanh(x));
    tape.backward(y);
  }
  EXPECT_EQ(x.grad()[0], 1.0);
}

TEST(Autodiff, SumGivesUnitGradient) {
  auto x = param({3}, {0.3, -1.0, 2.0});
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(sum(x));
  }
  ASSERT_EQ(x.grad().size(), 3u);
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Autodiff, ZeroScaledLossGivesZeroGradient) {
  auto x = param({3}, {0.3, -1.0, 2.0});
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(sum(scale(x, 0.0)));
  }
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Autodiff, NonScalarLossIsRejected) {
  auto x = param({2}, {1.0, 2.0});
  Tape tape;
  TapeScope scope(tape);
  const auto y = tanh(x);
  EXPECT_THROW(tape.backward(y), ShapeError);
}

TEST(Autodiff, TapeIsConsumedOnce) {
  auto x = param({2}, {1.0, 2.0});
  Tape tape;
  TapeScope scope(tape);
  const auto y = sum(x);
  tape.backward(y);
  EXPECT_TRUE(tape.consumed());
  EXPECT_THROW(tape.backward(y), TapeError);
}

TEST(Autodiff, GradientsAccumulateAcrossUses) {
  auto x = param({1}, {2.0});
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(sum(add(mul(x, x), x)));
  }
  EXPECT_EQ(x.grad()[0], 5.0);
}

TEST(Ste, ForwardRoundsWithTieUp) {
  const auto r = ste_round(Tensor::vector({0.49, 0.51, 0.5, 0.0, 1.0}));
  EXPECT_EQ(r.at(0), 0.0);
  EXPECT_EQ(r.at(1), 1.0);
  EXPECT_EQ(r.at(2), 1.0);
  EXPECT_EQ(r.at(3), 0.0);
  EXPECT_EQ(r.at(4), 1.0);
}

TEST(Ste, BackwardPassesUpstreamGradientUnchanged) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = param({4}, {u(rng), u(rng), u(rng), u(rng)});
    const auto w = Tensor::vector({n(rng), n(rng), n(rng), n(rng)});
    Tape tape;
    {
      TapeScope scope(tape);
      tape.backward(sum(mul(ste_round(x), w)));
    }
    for (std::size_t i = 0; i < 4; ++i) {
      const double g = x.grad()[i];
      const double expected = w.at(i);
      EXPECT_EQ(std::memcmp(&g, &expected, sizeof(double)), 0);
    }
  }
}

TEST(Ste, HardRoundBlocksGradient) {
  auto x = param({1}, {0.7});
  auto y = param({1}, {2.0});
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(sum(mul(hard_round(x), y)));
  }
  EXPECT_TRUE(x.grad().empty() || x.grad()[0] == 0.0);
  EXPECT_EQ(y.grad()[0], 1.0);
}

TEST(TimeEncode, ZeroIntervalZeroPhaseIsAllOnes) {
  Rng rng(1);
  auto p = TimeEncoderParams::init(6, rng);
  std::fill(p.phase.mutable_data().begin(), p.phase.mutable_data().end(), 0.0);
  const auto phi = time_encode(0.0, p);
  ASSERT_EQ(phi.numel(), 6u);
  for (double v : phi.data()) EXPECT_EQ(v, 1.0);
}

TEST(TimeEncode, OutputsStayInCosineRange) {
  Rng rng(2);
  auto p = TimeEncoderParams::init(8, rng);
  std::uniform_real_distribution<double> dt(0.0, 1e4);
  for (int i = 0; i < 200; ++i) {
    const auto phi = time_encode(dt(rng), p);
    for (double v : phi.data()) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(TimeEncode, NegativeIntervalIsRejected) {
  Rng rng(1);
  const auto p = TimeEncoderParams::init(4, rng);
  EXPECT_THROW(time_encode(-1.0, p), std::invalid_argument);
}

TEST(TimeEncode, FrequencyGradientMatchesCentralDifferences) {
  Rng rng(5);
  auto p = TimeEncoderParams::init(5, rng);
  p.scale = 0.1;
  const std::vector<double> deltas = {0.0, 1.5, 3.0, 7.25};
  const auto w = Tensor::from({4, 5}, std::vector<double>(20, 0.37));
  std::vector<Tensor> params = {p.omega, p.phase};
  const auto r = grad_check(
      [&] { return sum(mul(time_encode(deltas, p), w)); }, params, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(Lstm, ZeroParamsAndInputsGiveZeroState) {
  LstmParams p;
  p.input_weight = Tensor::zeros({8, 2});
  p.hidden_weight = Tensor::zeros({8, 2});
  p.bias = Tensor::zeros({8});
  const auto out = lstm_cell(Tensor::zeros({2}), Tensor::zeros({2}),
                             Tensor::zeros({2}), p);
  for (double v : out.h.data()) EXPECT_EQ(v, 0.0);
  for (double v : out.c.data()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, MatchesHandUnrolledGates) {
  // Gate rows ordered (input, forget, candidate, output), two units each.
  const std::vector<double> wx = {0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8,
                                  0.2, 0.1,  -0.3, 0.5, 0.4, 0.4, -0.1, 0.2};
  const std::vector<double> wh = {0.05, 0.1, -0.1, 0.2, 0.3, -0.2, 0.1, 0.1,
                                  -0.4, 0.2, 0.6,  -0.1, 0.0, 0.3, 0.2, -0.3};
  const std::vector<double> b = {0.01, -0.02, 0.5, 0.5, 0.0, 0.1, -0.1, 0.2};
  LstmParams p;
  p.input_weight = Tensor::from({8, 2}, wx);
  p.hidden_weight = Tensor::from({8, 2}, wh);
  p.bias = Tensor::from({8}, b);
  const double x[2] = {0.7, -1.3};
  const double h[2] = {0.2, 0.4};
  const double c[2] = {-0.5, 0.9};
  auto pre = [&](std::size_t row) {
    return wx[2 * row] * x[0] + wx[2 * row + 1] * x[1] + wh[2 * row] * h[0] +
           wh[2 * row + 1] * h[1] + b[row];
  };
  const auto out = lstm_cell(Tensor::vector({x[0], x[1]}),
                             Tensor::vector({h[0], h[1]}),
                             Tensor::vector({c[0], c[1]}), p);
  for (std::size_t k = 0; k < 2; ++k) {
    const double i = sigmoid_ref(pre(k));
    const double f = sigmoid_ref(pre(2 + k));
    const double g = std::tanh(pre(4 + k));
    const double o = sigmoid_ref(pre(6 + k));
    const double c_out = f * c[k] + i * g;
    EXPECT_NEAR(out.c.at(k), c_out, 1e-15);
    EXPECT_NEAR(out.h.at(k), o * std::tanh(c_out), 1e-15);
  }
}

TEST(Lstm, GradientsMatchCentralDifferences) {
  Rng rng(9);
  auto p = LstmParams::init(3, 3, rng);
  std::mt19937_64 data_rng(4);
  auto x = random_param({3}, data_rng);
  auto h = random_param({3}, data_rng);
  auto c = random_param({3}, data_rng);
  const auto w = Tensor::vector({0.3, -1.1, 0.8});
  std::vector<Tensor> params = {p.input_weight, p.hidden_weight, p.bias, x, h, c};
  const auto r = grad_check(
      [&] {
        auto out = lstm_cell(x, h, c, p);
        return add(sum(mul(out.h, w)), sum(out.c));
      },
      params, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(GradCheck, QuadraticAtThree) {
  auto x = param({1}, {3.0});
  std::vector<Tensor> params = {x};
  const auto r = grad_check([&] { return sum(mul(x, x)); }, params, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-9);
  EXPECT_EQ(r.coordinates, 1u);
}

TEST(GradCheck, ConstantFunctionHasZeroError) {
  auto x = param({2}, {3.0, 1.0});
  std::vector<Tensor> params = {x};
  const auto r = grad_check(
      [&] { return add(sum(scale(x, 0.0)), Tensor::scalar(4.0)); }, params,
      1e-5);
  EXPECT_EQ(r.max_rel_error, 0.0);
}

TEST(GradCheck, RelativeErrorUsesFloor) {
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(1e-9, 0.0), 1e-9 / 1e-8);
}

using OpCase = std::function<Tensor(const Tensor&, const Tensor&)>;

TEST(GradCheck, EveryDifferentiableOpOnRandomInputs) {
  const std::vector<std::pair<const char*, OpCase>> ops = {
      {"add", [](const Tensor& a, const Tensor& b) { return add(a, b); }},
      {"sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); }},
      {"mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }},
      {"scale", [](const Tensor& a, const Tensor&) { return scale(a, -1.7); }},
      {"add_scalar",
       [](const Tensor& a, const Tensor&) { return add_scalar(a, 0.3); }},
      {"mul_scalar",
       [](const Tensor& a, const Tensor& b) {
         return mul_scalar(a, reshape(slice(b, 0, 1), {1}));
       }},
      {"softmax", [](const Tensor& a, const Tensor&) { return softmax(a); }},
      {"tanh", [](const Tensor& a, const Tensor&) { return tanh(a); }},
      {"sigmoid", [](const Tensor& a, const Tensor&) { return sigmoid(a); }},
      {"exp", [](const Tensor& a, const Tensor&) { return exp(a); }},
      {"log",
       [](const Tensor& a, const Tensor&) { return log(add_scalar(mul(a, a), 0.5)); }},
      {"cos", [](const Tensor& a, const Tensor&) { return cos(a); }},
      {"mean",
       [](const Tensor& a, const Tensor& b) { return mul_scalar(b, mean(a)); }},
      {"concat",
       [](const Tensor& a, const Tensor& b) {
         const Tensor parts[] = {a, b};
         return slice(concat(parts), 1, 2 * a.numel() - 1);
       }},
      {"maximum", [](const Tensor& a, const Tensor& b) { return maximum(a, b); }},
      {"clamp", [](const Tensor& a, const Tensor&) { return clamp(a, -0.5, 0.5); }},
  };
  std::mt19937_64 rng(2024);
  std::size_t cases = 0;
  for (int trial = 0; trial < 7; ++trial) {
    for (const auto& [name, op] : ops) {
      const std::size_t n = 2 + (trial % 5);
      auto a = random_param({n}, rng);
      auto b = random_param({n}, rng);
      const auto w = random_param({2 * n}, rng).clone();
      std::vector<Tensor> params = {a, b};
      const auto r = grad_check(
          [&] {
            auto y = op(a, b);
            return sum(mul(y, slice(w, 0, y.numel())));
          },
          params, 1e-5);
      EXPECT_LT(r.max_rel_error, 1e-5) << name << " trial " << trial;
      ++cases;
    }
  }
  EXPECT_GE(cases, 100u);
}

TEST(GradCheck, MatmulLinearStackAndReshape) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 1 + trial % 3;
    const std::size_t k = 2 + trial % 4;
    auto a = random_param({m, k}, rng);
    auto w = random_param({3, k}, rng);
    auto bias = random_param({3}, rng);
    auto v = random_param({k}, rng);
    std::vector<Tensor> params = {a, w, bias, v};
    const auto r = grad_check(
        [&] {
          const auto y = linear(a, w, bias);
          const Tensor rows[] = {matmul(a, v), matmul(a, v)};
          return add(sum(tanh(y)), sum(reshape(stack_rows(rows), {2 * m})));
        },
        params, 1e-5);
    EXPECT_LT(r.max_rel_error, 1e-5) << "trial " << trial;
  }
}

TEST(Adam, ZeroGradientLeavesParametersAndAdvancesStep) {
  auto x = param({2}, {1.0, -2.0});
  std::vector<Tensor> params = {x};
  auto state = adam_init(params, 0.1);
  adam_step(params, state);
  EXPECT_EQ(x.at(0), 1.0);
  EXPECT_EQ(x.at(1), -2.0);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  auto x = param({2}, {1.0, -2.0});
  std::vector<Tensor> params = {x};
  auto state = adam_init(params, 0.01);
  x.impl()->ensure_grad() = {500.0, -800.0};
  adam_step(params, state);
  EXPECT_NEAR(x.at(0), 1.0 - 0.01, 1e-10);
  EXPECT_NEAR(x.at(1), -2.0 + 0.01, 1e-10);
}

TEST(Adam, UninitialisedStateIsRejected) {
  auto x = param({1}, {1.0});
  std::vector<Tensor> params = {x};
  AdamState state;
  EXPECT_THROW(adam_step(params, state), std::logic_error);
}

TEST(Adam, IdenticalRunsGiveIdenticalParameters) {
  auto run = [] {
    auto x = param({3}, {0.5, -0.25, 2.0});
    std::vector<Tensor> params = {x};
    auto state = adam_init(params, 0.05);
    for (int step = 0; step < 20; ++step) {
      zero_grad(params);
      Tape tape;
      {
        TapeScope scope(tape);
        tape.backward(sum(mul(tanh(x), x)));
      }
      adam_step(params, state);
    }
    return std::vector<double>(x.data().begin(), x.data().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripIsBitExact) {
  std::mt19937_64 rng(8);
  std::vector<NamedTensor> records = {
      {"a.weight", random_param({3, 4}, rng, -1e6, 1e6)},
      {"a.bias", random_param({4}, rng)},
      {"scalar", Tensor::scalar(std::nextafter(1.0, 2.0))},
  };
  std::stringstream buffer;
  write_checkpoint(buffer, records);
  EXPECT_EQ(buffer.str().substr(0, 8), "SEANCKPT");
  const auto back = read_checkpoint(buffer);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(back[i].name, records[i].name);
    EXPECT_EQ(back[i].tensor.shape(), records[i].tensor.shape());
    EXPECT_EQ(std::memcmp(back[i].tensor.data().data(),
                          records[i].tensor.data().data(),
                          records[i].tensor.numel() * sizeof(double)),
              0);
  }
}

TEST(Checkpoint, RejectsBadMagicAndTruncation) {
  std::stringstream bad("NOTACKPT");
  EXPECT_THROW(read_checkpoint(bad), CheckpointError);
  std::stringstream buffer;
  write_checkpoint(buffer, {{"x", Tensor::vector({1.0, 2.0})}});
  auto bytes = buffer.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream cut(bytes);
  EXPECT_THROW(read_checkpoint(cut), CheckpointError);
}

TEST(Checkpoint, AssignChecksNamesAndShapes) {
  auto dst = param({2}, {0.0, 0.0});
  std::vector<NamedTensor> target = {{"w", dst}};
  EXPECT_THROW(assign_checkpoint({{"v", Tensor::vector({1.0, 2.0})}}, target),
               CheckpointError);
  EXPECT_THROW(assign_checkpoint({{"w", Tensor::vector({1.0})}}, target),
               CheckpointError);
  assign_checkpoint({{"w", Tensor::vector({1.0, 2.0})}}, target);
  EXPECT_EQ(dst.at(1), 2.0);
}

}  // namespace
}  // namespace sean::diff
