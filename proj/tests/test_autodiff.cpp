#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "camlab/errors.hpp"
#include "camlab/gradcheck.hpp"
#include "camlab/tape.hpp"

using namespace camlab;

namespace {

Tensor random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(s);
  for (auto& x : t.data()) x = d(rng);
  return t;
}

// Values bounded away from 0 so ReLU/max kinks are not hit by a 1e-5 step.
Tensor off_kink(Shape s, std::uint64_t seed) {
  Tensor t = random_tensor(s, seed, 0.1, 1.0);
  std::mt19937_64 rng(seed + 99);
  for (auto& x : t.data())
    if (rng() & 1) x = -x;
  return t;
}

void expect_fd(const ScalarFn& fn, const Tensor& at, double tol = 1e-6) {
  const auto r = finite_diff_check(fn, at, 1e-5);
  EXPECT_LE(r.max_rel_error, tol) << "worst index " << r.worst_index;
  EXPECT_GT(r.checked, 0u);
}

}  // namespace

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor(Shape{}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 0}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_DOUBLE_EQ(t.sum(), 9.0);
}

TEST(Ops, ReluDefinition) {
  Tape tape;
  Var x = tape.constant(Tensor::vector({-1, 0, 2}));
  EXPECT_EQ(tape.value(tape.relu(x)).values(), (std::vector<double>{0, 0, 2}));
}

TEST(Ops, SoftmaxOfEqualLogits) {
  Tape tape;
  Var x = tape.constant(Tensor::vector({3.7, 3.7}));
  const auto& p = tape.value(tape.softmax(x));
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Ops, SoftmaxSumsToOne) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Tape tape;
    Var x = tape.constant(random_tensor({11}, s, -30, 30));
    const auto& p = tape.value(tape.softmax(x));
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    for (double v : p.values()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(Ops, ConvSlidingWindowSum) {
  Tape tape;
  Var x = tape.constant(Tensor({1, 3, 3}, 1.0));
  Var w = tape.constant(Tensor({1, 1, 2, 2}, 1.0));
  Var b = tape.constant(Tensor({1}, 0.0));
  const auto& y = tape.value(tape.conv2d(x, w, b));
  EXPECT_EQ(y.shape(), (Shape{1, 2, 2}));
  for (double v : y.values()) EXPECT_EQ(v, 4.0);
}

TEST(Ops, ConvStrideAndPaddingByHand) {
  // 1x4x4 ramp, 1x1x3x3 ones kernel, pad 1, stride 2: windows centred on
  // (0,0), (0,2), (2,0), (2,2).
  std::vector<double> v(16);
  for (int i = 0; i < 16; ++i) v[i] = i;
  Tape tape;
  Var x = tape.constant(Tensor({1, 4, 4}, v));
  Var w = tape.constant(Tensor({1, 1, 3, 3}, 1.0));
  Var b = tape.constant(Tensor({1}, 0.5));
  const auto& y = tape.value(tape.conv2d(x, w, b, {2, 1}));
  ASSERT_EQ(y.shape(), (Shape{1, 2, 2}));
  auto window = [&](int r, int c) {
    double s = 0.5;
    for (int i = r - 1; i <= r + 1; ++i)
      for (int j = c - 1; j <= c + 1; ++j)
        if (i >= 0 && i < 4 && j >= 0 && j < 4) s += v[i * 4 + j];
    return s;
  };
  EXPECT_EQ(y[0], window(0, 0));
  EXPECT_EQ(y[1], window(0, 2));
  EXPECT_EQ(y[2], window(2, 0));
  EXPECT_EQ(y[3], window(2, 2));
}

TEST(Ops, ShapeErrorNamesOpAndShapes) {
  Tape tape;
  Var a = tape.constant(Tensor({2, 3}));
  Var b = tape.constant(Tensor({3, 2}));
  try {
    tape.add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("add"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3x2]"), std::string::npos) << msg;
  }
  Var x = tape.constant(Tensor({1, 2, 2}));
  Var w = tape.constant(Tensor({1, 1, 3, 3}));
  Var bias = tape.constant(Tensor({1}));
  EXPECT_THROW(tape.conv2d(x, w, bias), ShapeError);
}

TEST(Backward, SquareSum) {
  Tape tape;
  Var x = tape.variable(Tensor::vector({3}));
  Var y = tape.sum(tape.mul(x, x));
  EXPECT_EQ(tape.backward(y).of(x).values(), (std::vector<double>{6}));
}

TEST(Backward, SymmetricCrossEntropy) {
  Tape tape;
  Var z = tape.variable(Tensor::vector({1, 1}));
  Var ce = tape.scale(tape.select(tape.log_softmax(z), {0}), -1.0);
  const auto g = tape.backward(ce).of(z);
  EXPECT_NEAR(g[0], -0.5, 1e-15);
  EXPECT_NEAR(g[1], 0.5, 1e-15);
}

TEST(Backward, RejectsNonScalarTarget) {
  Tape tape;
  Var x = tape.variable(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.backward(tape.relu(x)), ShapeError);
}

TEST(Backward, GradientShapesMatchForward) {
  Tape tape;
  Var x = tape.variable(off_kink({2, 4, 4}, 1));
  Var w = tape.variable(off_kink({3, 2, 3, 3}, 2));
  Var b = tape.variable(off_kink({3}, 3));
  Var y = tape.sum(tape.relu(tape.conv2d(x, w, b, {1, 1})));
  const auto g = tape.backward(y);
  for (Var v : {x, w, b}) EXPECT_EQ(g.of(v).shape(), tape.value(v).shape());
}

TEST(Backward, Linearity) {
  const Tensor p = off_kink({6}, 4);
  auto f = [](Tape& t, Var x) { return t.sum(t.exp(t.scale(x, 0.3))); };
  auto g = [](Tape& t, Var x) { return t.sum(t.mul(t.relu(x), x)); };
  Tape t1, t2, t3;
  Var x1 = t1.variable(p), x2 = t2.variable(p), x3 = t3.variable(p);
  const auto gf = t1.backward(f(t1, x1)).of(x1);
  const auto gg = t2.backward(g(t2, x2)).of(x2);
  const double a = 2.5, b = -0.75;
  const auto gc = t3.backward(t3.add(t3.scale(f(t3, x3), a), t3.scale(g(t3, x3), b))).of(x3);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(gc[i], a * gf[i] + b * gg[i], 1e-12);
}

TEST(Backward, Deterministic) {
  auto run = [] {
    Tape tape;
    Var x = tape.variable(off_kink({1, 6, 6}, 5));
    Var w = tape.constant(off_kink({2, 1, 3, 3}, 6));
    Var b = tape.constant(off_kink({2}, 7));
    Var y = tape.sum(tape.softmax(tape.reshape(tape.max_pool2d(tape.relu(tape.conv2d(x, w, b, {1, 1})), 2), {18})));
    return std::pair{tape.value(y), tape.backward(y).of(x)};
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

// --- finite differences, op by op ---------------------------------------

TEST(FiniteDiff, LinearMapIsExact) {
  const Tensor W = random_tensor({3, 5}, 8);
  const Tensor bvec = random_tensor({3}, 9);
  const Tensor c = random_tensor({3}, 10);
  auto fn = [&](Tape& t, Var x) {
    return t.sum(t.mul(t.dense(x, t.constant(W), t.constant(bvec)), t.constant(c)));
  };
  const auto r = finite_diff_check(fn, random_tensor({5}, 11), 1e-3);
  EXPECT_LE(r.max_rel_error, 1e-9);
}

TEST(FiniteDiff, EveryOp) {
  const Tensor w = off_kink({2, 2, 3, 3}, 12), b = off_kink({2}, 13), c = random_tensor({2, 4, 4}, 14);
  expect_fd([&](Tape& t, Var x) { return t.sum(t.mul(t.conv2d(x, t.constant(w), t.constant(b), {1, 1}), t.constant(c))); },
            off_kink({2, 4, 4}, 15));
  // conv weights as the variable, with stride
  const Tensor img = off_kink({2, 5, 5}, 16);
  expect_fd([&](Tape& t, Var k) {
    return t.sum(t.exp(t.scale(t.conv2d(t.constant(img), k, t.constant(b), {2, 0}), 0.2)));
  }, off_kink({2, 2, 3, 3}, 17));
  const Tensor W = random_tensor({4, 6}, 18), bb = random_tensor({4}, 19), cc = random_tensor({4}, 20);
  expect_fd([&](Tape& t, Var x) { return t.sum(t.mul(t.dense(t.constant(off_kink({6}, 21)), x, t.constant(bb)), t.constant(cc))); },
            W);
  const Tensor M = random_tensor({3, 4}, 22);
  expect_fd([&](Tape& t, Var x) { return t.sum(t.exp(t.scale(t.matmul(x, t.constant(M)), 0.5))); }, random_tensor({2, 3}, 23));
  expect_fd([&](Tape& t, Var x) { return t.sum(t.mul(t.transpose(x), t.constant(M))); }, random_tensor({4, 3}, 24));
  expect_fd([&](Tape& t, Var x) { return t.sum(t.mul(t.relu(x), t.relu(x))); }, off_kink({7}, 25));
  expect_fd([&](Tape& t, Var x) { return t.sum(t.mul(t.max_pool2d(x, 2), t.constant(random_tensor({2, 2, 2}, 26)))); },
            random_tensor({2, 4, 4}, 27));
  expect_fd([&](Tape& t, Var x) { return t.sum(t.exp(t.global_avg_pool(x))); }, random_tensor({3, 2, 2}, 28));
  expect_fd([&](Tape& t, Var x) { return t.sum(t.mul(t.softmax(x), t.constant(random_tensor({5}, 29)))); },
            random_tensor({5}, 30, -3, 3));
  expect_fd([&](Tape& t, Var x) { return t.select(t.log_softmax(x), {2}); }, random_tensor({5}, 31, -3, 3));
  expect_fd([&](Tape& t, Var x) { return t.sum(t.log(x)); }, random_tensor({4}, 32, 0.5, 2.0));
  expect_fd([&](Tape& t, Var x) { return t.sum(t.mul(t.sub(x, t.constant(c)), t.add(x, x))); }, random_tensor({2, 4, 4}, 33));
  expect_fd([&](Tape& t, Var x) { return t.sum(t.exp(t.sum_over(x, {1}))); }, random_tensor({2, 3, 2}, 34));
  expect_fd([&](Tape& t, Var x) { return t.sum(t.exp(t.sum_over(x, {0, 2}))); }, random_tensor({2, 3, 2}, 35));
  expect_fd([&](Tape& t, Var x) { return t.sum(t.exp(t.max_over(x, 1))); }, random_tensor({3, 4}, 36));
  expect_fd([&](Tape& t, Var x) { return t.sum(t.exp(t.max_over(x, 0))); }, random_tensor({3, 4}, 37));
  expect_fd([&](Tape& t, Var x) {
    return t.sum(t.mul(t.broadcast_to(x, {3, 2, 2}), t.constant(random_tensor({3, 2, 2}, 38))));
  }, random_tensor({3}, 39));
  expect_fd([&](Tape& t, Var x) {
    return t.sum(t.exp(t.scatter(t.select(x, {4, 0, 2}), {1, 3, 5}, {2, 3})));
  }, random_tensor({2, 3}, 40));
  expect_fd([&](Tape& t, Var x) {
    return t.sum(t.mul(t.minmax_normalize(x), t.constant(random_tensor({3, 3}, 41))));
  }, random_tensor({3, 3}, 42));
}

TEST(FiniteDiff, ReluAtZeroIsSkipped) {
  Tensor p = Tensor::vector({0.5, 0.0, -0.3});
  const auto r = finite_diff_check([](Tape& t, Var x) { return t.sum(t.relu(x)); }, p, 1e-5);
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_EQ(r.skipped[0], 1u);
  EXPECT_LE(r.max_rel_error, 1e-9);
  // Subgradient convention: 0 at the kink.
  Tape tape;
  Var x = tape.variable(p);
  EXPECT_EQ(tape.backward(tape.sum(tape.relu(x))).of(x)[1], 0.0);
}

TEST(FiniteDiff, RelativeErrorDenominator) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(1e-13, 0.0), 1e-13 / 1e-12);
}

TEST(Backward, RestrictedToInteriorNode) {
  Tape tape;
  Var x = tape.constant(Tensor::vector({1, 2, 3}));
  Var h = tape.exp(x);
  Var y = tape.sum(tape.mul(h, h));
  const Var wrt[] = {h};
  const auto g = tape.backward(y, wrt);
  ASSERT_TRUE(g.has(h));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(g.of(h)[i], 2.0 * std::exp(double(i + 1)), 1e-12);
}

TEST(DoubleBackward, GradGraphMatchesFiniteDifferences) {
  // f(x) = sum_i (d/dx_i g(x))^2 with g a small smooth network; checks the
  // recorded backward pass against differences of the eager one.
  const Tensor W1 = random_tensor({4, 3}, 43), b1 = random_tensor({4}, 44), W2 = random_tensor({2, 4}, 45),
               b2 = random_tensor({2}, 46);
  auto fn = [&](Tape& t, Var x) {
    Var h = t.exp(t.scale(t.dense(x, t.constant(W1), t.constant(b1)), 0.3));
    Var y = t.select(t.dense(h, t.constant(W2), t.constant(b2)), {1});
    const Var wrt[] = {x};
    Var g = t.grad_graph(y, wrt)[0];
    return t.sum(t.mul(g, g));
  };
  expect_fd(fn, random_tensor({3}, 47), 1e-6);
}

TEST(DoubleBackward, UnsupportedOpThrows) {
  Tape tape;
  Var x = tape.variable(Tensor::vector({0.2, 0.7}));
  Var y = tape.select(tape.softmax(x), {0});
  const Var wrt[] = {x};
  EXPECT_THROW(tape.grad_graph(y, wrt), std::logic_error);
}

TEST(Ops, LogRejectsNonPositive) {
  Tape tape;
  Var x = tape.constant(Tensor::vector({1.0, 0.0}));
  EXPECT_THROW(tape.log(x), NumericError);
}
