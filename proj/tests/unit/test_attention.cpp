#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "rsisc/attention.hpp"
#include "rsisc/error.hpp"

using namespace rsisc;
using rsisc::testing::max_relative_error;
using rsisc::testing::numeric_gradient;
using rsisc::testing::random_tensor;

namespace {

struct Fixture {
  AttentionConfig cfg{3, 4, PoolMode::average, ConcatAxis::channel};
  ModelParams params;
  Tensor fmap;

  Fixture(std::size_t b, std::size_t w, std::size_t h, std::size_t c, std::uint64_t seed, PoolMode mode) {
    cfg.mode = mode;
    Rng rng(seed);
    init_attention_pool(params, "pool", c, cfg, rng, InitOptions{0.05, false});
    std::mt19937_64 data_rng(seed + 1);
    fmap = random_tensor({b, w, h, c}, data_rng);
  }

  Tensor run(const Tensor& input, AttentionTrace* trace = nullptr) {
    Tape tape;
    return attention_pool(tape, tape.constant(input), params, "pool", cfg, trace).value();
  }
};

}  // namespace

TEST(AttentionPool, OutputIsTwiceTheChannelWidth) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t b = dim(rng), w = dim(rng), h = dim(rng), c = dim(rng);
    Fixture f(b, w, h, c, trial, PoolMode::average);
    EXPECT_EQ(f.run(f.fmap).shape(), (Shape{b, 2 * c}));
    f.cfg.concat_axis = ConcatAxis::batch;
    EXPECT_EQ(f.run(f.fmap).shape(), (Shape{2 * b, c}));
  }
}

TEST(AttentionPool, AttentionWeightsAreDistributions) {
  Fixture f(2, 4, 3, 5, 2, PoolMode::average);
  AttentionTrace trace;
  f.run(f.fmap, &trace);
  ASSERT_EQ(trace.width_weights.shape(), (Shape{2, 3, 4, 4}));
  ASSERT_EQ(trace.height_weights.shape(), (Shape{2, 3, 3, 3}));
  for (const Tensor* w : {&trace.width_weights, &trace.height_weights}) {
    const std::size_t l = w->extent(3);
    for (std::size_t row = 0; row < w->size() / l; ++row) {
      double total = 0.0;
      for (std::size_t j = 0; j < l; ++j) total += (*w)[row * l + j];
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(AttentionPool, ZeroingOneStreamOnlyChangesItsHalf) {
  Fixture f(3, 4, 5, 6, 3, PoolMode::average);
  const Tensor before = f.run(f.fmap);
  for (auto& [name, p] : f.params)
    if (name.rfind("pool.height.", 0) == 0) p.value.fill(0.0);
  const Tensor after = f.run(f.fmap);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t c = 0; c < 12; ++c) {
      if (c < 6)
        EXPECT_EQ(after.at({b, c}), before.at({b, c}));
      else
        EXPECT_EQ(after.at({b, c}), 0.0);
    }
}

TEST(AttentionPool, InvariantToReorderingColumns) {
  // No positional encoding: self-attention is permutation-equivariant and the
  // surrounding pools are symmetric, so shuffling the W axis changes nothing.
  Fixture f(2, 5, 4, 3, 4, PoolMode::average);
  const std::vector<std::size_t> order{3, 0, 4, 1, 2};
  Tensor shuffled(f.fmap.shape());
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t x = 0; x < 5; ++x)
      for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t c = 0; c < 3; ++c) shuffled.at({b, x, y, c}) = f.fmap.at({b, order[x], y, c});
  EXPECT_LT(rsisc::testing::max_abs_diff(f.run(f.fmap), f.run(shuffled)), 1e-12);
}

TEST(AttentionPool, SingleColumnMapStillWorks) {
  Fixture f(2, 1, 1, 4, 5, PoolMode::max);
  EXPECT_EQ(f.run(f.fmap).shape(), (Shape{2, 8}));
}

TEST(AttentionPool, InputGradientMatchesFiniteDifferences) {
  for (PoolMode mode : {PoolMode::average, PoolMode::max}) {
    Fixture f(2, 3, 4, 3, 6, mode);
    std::mt19937_64 rng(7);
    const Tensor r = random_tensor({2, 6}, rng);
    auto loss = [&](const Tensor& x) {
      Tape tape;
      Var out = attention_pool(tape, tape.constant(x), f.params, "pool", f.cfg);
      return ag::sum(ag::mul(out, tape.constant(r))).value().item();
    };
    Tape tape;
    Var x = tape.leaf(f.fmap);
    tape.backward(ag::sum(ag::mul(attention_pool(tape, x, f.params, "pool", f.cfg), tape.constant(r))));
    EXPECT_LT(max_relative_error(tape.grad(x), numeric_gradient(loss, f.fmap)), 1e-4);
  }
}

TEST(AttentionPool, ParameterGradientsMatchFiniteDifferences) {
  Fixture f(2, 3, 3, 4, 8, PoolMode::average);
  std::mt19937_64 rng(9);
  const Tensor r = random_tensor({2, 8}, rng);
  f.params.zero_grad();
  {
    Tape tape;
    tape.backward(
        ag::sum(ag::mul(attention_pool(tape, tape.constant(f.fmap), f.params, "pool", f.cfg), tape.constant(r))));
  }
  for (const std::string name : {"pool.width.query.kernel", "pool.height.key.bias", "pool.width.value.kernel",
                                 "pool.height.output.kernel", "pool.width.output.bias"}) {
    Param& p = f.params.at(name);
    const Tensor analytic = p.grad;
    auto loss = [&](const Tensor& v) {
      const Tensor saved = p.value;
      p.value = v;
      Tape tape;
      const double out =
          ag::sum(ag::mul(attention_pool(tape, tape.constant(f.fmap), f.params, "pool", f.cfg), tape.constant(r)))
              .value()
              .item();
      p.value = saved;
      return out;
    };
    EXPECT_LT(max_relative_error(analytic, numeric_gradient(loss, p.value)), 1e-4) << name;
  }
}

TEST(GlobalPool, MatchesDirectMean) {
  std::mt19937_64 rng(10);
  const Tensor x = random_tensor({2, 3, 4, 5}, rng);
  Tape tape;
  const Tensor out = global_pool(tape.constant(x), PoolMode::average).value();
  const Tensor top = global_pool(tape.constant(x), PoolMode::max).value();
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t c = 0; c < 5; ++c) {
      double total = 0.0, best = -1e300;
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
          total += x.at({b, i, j, c});
          best = std::max(best, x.at({b, i, j, c}));
        }
      EXPECT_NEAR(out.at({b, c}), total / 12.0, 1e-14);
      EXPECT_EQ(top.at({b, c}), best);
    }
}

TEST(AttentionPool, RejectsWrongRankAndBadConfig) {
  Fixture f(1, 2, 2, 3, 11, PoolMode::average);
  Tape tape;
  EXPECT_THROW(attention_pool(tape, tape.constant(Tensor({2, 3})), f.params, "pool", f.cfg), ShapeError);
  AttentionConfig bad{0, 4, PoolMode::average, ConcatAxis::channel};
  EXPECT_THROW(bad.validate(), ConfigError);
}
