#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "oracles.hpp"
#include "rsisc/autograd.hpp"
#include "rsisc/error.hpp"

using namespace rsisc;
using rsisc::testing::max_relative_error;
using rsisc::testing::numeric_gradient;
using rsisc::testing::random_tensor;

namespace {

using UnaryOp = std::function<Var(const Var&)>;

// Loss = sum(op(x) * r) for a fixed random r, so every output entry gets a
// distinct upstream gradient.
void expect_gradient_matches(const UnaryOp& op, Tensor x, std::uint64_t seed, double tol = 1e-6) {
  std::mt19937_64 rng(seed);
  Tensor r;
  {
    Tape probe;
    r = random_tensor(op(probe.leaf(x)).shape(), rng);
  }
  auto loss_of = [&](const Tensor& input) {
    Tape tape;
    Var y = op(tape.leaf(input));
    return ag::sum(ag::mul(y, tape.constant(r))).value().item();
  };
  Tape tape;
  Var leaf = tape.leaf(x);
  Var loss = ag::sum(ag::mul(op(leaf), tape.constant(r)));
  tape.backward(loss);
  const Tensor analytic = tape.grad(leaf);
  const Tensor numeric = numeric_gradient(loss_of, x);
  EXPECT_LT(max_relative_error(analytic, numeric), tol);
}

Tensor random(const Shape& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_tensor(s, rng);
}

}  // namespace

TEST(AutogradGradients, Matmul) {
  const Tensor w = random({4, 3}, 2);
  expect_gradient_matches([&](const Var& x) { return ag::matmul(x, x.tape()->constant(w)); }, random({2, 5, 4}, 1), 3);
  const Tensor a = random({2, 3, 4}, 4);
  expect_gradient_matches([&](const Var& x) { return ag::matmul(x.tape()->constant(a), x); }, random({2, 4, 2}, 5), 6);
}

TEST(AutogradGradients, ShapeOps) {
  expect_gradient_matches([](const Var& x) { return ag::transpose_last2(x); }, random({2, 3, 4}, 7), 8);
  expect_gradient_matches([](const Var& x) { return ag::permute(x, {2, 0, 1, 3}); }, random({2, 3, 4, 2}, 9), 10);
  expect_gradient_matches([](const Var& x) { return ag::reshape(x, {6, 4}); }, random({2, 3, 4}, 11), 12);
  expect_gradient_matches([](const Var& x) { return ag::slice(x, 1, 1, 2); }, random({2, 4, 3}, 13), 14);
  expect_gradient_matches(
      [](const Var& x) { return ag::concat({x, ag::scale(x, 2.0), ag::slice(x, 1, 0, 1)}, 1); }, random({2, 3, 2}, 15),
      16);
}

TEST(AutogradGradients, ElementwiseAndBias) {
  const Tensor other = random({3, 4}, 17);
  expect_gradient_matches([&](const Var& x) { return ag::add(x, x.tape()->constant(other)); }, random({3, 4}, 18), 19);
  expect_gradient_matches([](const Var& x) { return ag::mul(x, x); }, random({3, 4}, 20), 21);
  const Tensor bias = random({4}, 22);
  expect_gradient_matches([&](const Var& x) { return ag::add_bias(x, x.tape()->constant(bias)); }, random({2, 3, 4}, 23),
                          24);
  expect_gradient_matches([](const Var& x) { return ag::add_bias(x.tape()->constant(Tensor({5, 3})), x); },
                          random({3}, 25), 26);
  // Values drawn away from zero so no probe straddles the ReLU kink.
  Tensor x = random({4, 5}, 27);
  for (double& v : x.data()) v += v >= 0 ? 0.1 : -0.1;
  expect_gradient_matches([](const Var& v) { return ag::relu(v); }, x, 28);
}

TEST(AutogradGradients, SoftmaxAndPooling) {
  expect_gradient_matches([](const Var& x) { return ag::softmax_last(x); }, random({3, 5}, 29), 30);
  expect_gradient_matches([](const Var& x) { return ag::pool_axis(x, 1, ops::PoolMode::average); },
                          random({2, 4, 3}, 31), 32);
  expect_gradient_matches([](const Var& x) { return ag::pool_axis(x, 2, ops::PoolMode::max); }, random({2, 4, 3}, 33),
                          34);
}

TEST(AutogradGradients, Conv2dAllInputs) {
  const Tensor x0 = random({2, 6, 6, 3}, 35), k0 = random({3, 3, 3, 4}, 36), b0 = random({4}, 37);
  expect_gradient_matches(
      [&](const Var& x) { return ag::conv2d(x, x.tape()->constant(k0), x.tape()->constant(b0), 2); }, x0, 38);
  expect_gradient_matches(
      [&](const Var& k) { return ag::conv2d(k.tape()->constant(x0), k, k.tape()->constant(b0), 1); }, k0, 39);
  expect_gradient_matches(
      [&](const Var& b) { return ag::conv2d(b.tape()->constant(x0), b.tape()->constant(k0), b, 1); }, b0, 40);
}

TEST(AutogradGradients, ReductionsAndKl) {
  expect_gradient_matches([](const Var& x) { return ag::sum_squares(x); }, random({3, 3}, 41), 42);
  Tensor targets({2, 3}, std::vector<double>{0.2, 0.5, 0.3, 1.0, 0.0, 0.0});
  expect_gradient_matches([&](const Var& x) { return ag::kl_divergence(ag::softmax_last(x), targets, 1e-12); },
                          random({2, 3}, 43), 44);
}

TEST(Autograd, ReusedVariableAccumulatesGradient) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, std::vector<double>{3.0, -2.0}));
  Var y = ag::sum(ag::add(ag::mul(x, x), x));  // d/dx = 2x + 1
  tape.backward(y);
  EXPECT_EQ(tape.grad(x).values(), (std::vector<double>{7.0, -3.0}));
}

TEST(Autograd, ParamGradientsAccumulateAcrossBackwardCalls) {
  Param p{Tensor({1}, 2.0), Tensor({1})};
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    tape.backward(ag::sum_squares(tape.param(p)));
  }
  EXPECT_EQ(p.grad[0], 8.0);
}

TEST(Autograd, BackwardErrors) {
  Tape tape;
  Var c = tape.constant(Tensor::scalar(1.0));
  EXPECT_THROW(tape.backward(ag::scale(c, 2.0)), Error);
  Var x = tape.leaf(Tensor({2}, 1.0));
  EXPECT_THROW(tape.backward(ag::scale(x, 2.0)), ShapeError);
  Tape other;
  EXPECT_THROW(other.backward(ag::sum(x)), Error);
}

TEST(ModelParams, SumSquaresAndZeroGrad) {
  ModelParams params;
  params.add("a", Tensor({2}, std::vector<double>{1, 2}));
  params.add("b", Tensor({1}, 3.0));
  EXPECT_EQ(params.scalar_count(), 3u);
  EXPECT_EQ(params.sum_squares(), 14.0);
  params.at("a").grad.fill(5.0);
  params.zero_grad();
  EXPECT_EQ(params.at("a").grad.values(), (std::vector<double>{0, 0}));
  EXPECT_THROW(params.at("missing"), ConfigError);
}
