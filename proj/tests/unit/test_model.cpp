#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rsisc/checkpoint.hpp"
#include "rsisc/error.hpp"
#include "rsisc/model.hpp"

using namespace rsisc;
using rsisc::testing::random_tensor;

namespace {

std::vector<Image> random_images(std::size_t n, std::size_t side, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Image> out;
  for (std::size_t i = 0; i < n; ++i) {
    Image img(side, side);
    for (double& v : img.pixels) v = uniform01(rng);
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace

TEST(Backbone, StageParsingRoundTrips) {
  const auto stages = parse_stages("16x3s1, 32x3s2,8x5s3");
  ASSERT_EQ(stages.size(), 3u);
  EXPECT_EQ(stages[1], (ConvStage{32, 3, 2}));
  EXPECT_EQ(stages[2], (ConvStage{8, 5, 3}));
  EXPECT_EQ(parse_stages(stages_to_string(stages)), stages);
  for (const char* bad : {"", "16x3", "16x3s1x", "ax3s1", "16x0s1"}) {
    SCOPED_TRACE(bad);
    EXPECT_THROW(BackboneConfig{parse_stages(bad)}.output_extent(32), ConfigError);
  }
}

TEST(Backbone, OutputExtents) {
  EXPECT_EQ(BackboneConfig::desk().output_extent(32), 4u);
  EXPECT_EQ(BackboneConfig::compact().output_extent(14), 3u);
  EXPECT_EQ(BackboneConfig::compact().feature_channels(), 32u);
  EXPECT_THROW(BackboneConfig::compact().output_extent(8), ShapeError);
}

TEST(Backbone, ForwardShapeMatchesExtentArithmetic) {
  Rng rng(1);
  ModelParams params;
  const BackboneConfig cfg = BackboneConfig::compact();
  init_backbone(params, cfg, rng);
  Tape tape;
  Var out = backbone_forward(tape, tape.constant(to_feature_map(random_images(3, 14, 2))), params, cfg);
  EXPECT_EQ(out.shape(), (Shape{3, 3, 3, 32}));
  for (double v : out.value().data()) EXPECT_GE(v, 0.0);
  EXPECT_THROW(backbone_forward(tape, tape.constant(Tensor({1, 14, 12, 3})), params, cfg), ShapeError);
}

TEST(Init, GaussianMomentsMatchTheRequestedVariance) {
  Rng rng(3);
  const Tensor t = gaussian_tensor({100000}, 0.1, rng);
  double mean = 0.0;
  for (double v : t.data()) mean += v;
  mean /= static_cast<double>(t.size());
  double var = 0.0;
  for (double v : t.data()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(t.size() - 1);
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 0.1, 0.01);
}

TEST(Init, EveryParameterIsDrawnUnlessBiasIsZeroed) {
  ModelConfig cfg;
  Rng rng(4);
  ModelParams params = init_params(cfg, Strategy::direct, nullptr, rng);
  for (const auto& [name, p] : params) {
    double total = 0.0;
    for (double v : p.value.data()) total += std::abs(v);
    EXPECT_GT(total, 0.0) << name;
  }
  Rng again(4);
  ModelParams zeroed = init_params(cfg, Strategy::direct, nullptr, again, InitOptions{0.1, true});
  for (const auto& [name, p] : zeroed)
    if (name.ends_with(".bias"))
      for (double v : p.value.data()) EXPECT_EQ(v, 0.0) << name;
}

TEST(Init, SameSeedGivesIdenticalParameters) {
  ModelConfig cfg;
  Rng a(5), b(5), c(6);
  EXPECT_TRUE(init_params(cfg, Strategy::direct, nullptr, a) == init_params(cfg, Strategy::direct, nullptr, b));
  Rng a2(5);
  EXPECT_FALSE(init_params(cfg, Strategy::direct, nullptr, a2) == init_params(cfg, Strategy::direct, nullptr, c));
}

TEST(Transfer, CopiesBackboneOnly) {
  ModelConfig cfg;
  Checkpoint source;
  source.model = cfg;
  Rng rng(7);
  source.params = init_params(cfg, Strategy::direct, nullptr, rng);
  ModelConfig target = cfg;
  target.head = HeadConfig::desk(7);
  Rng rng2(8);
  ModelParams params = init_params(target, Strategy::transfer, &source, rng2);
  for (const auto& [name, p] : params) {
    if (name.starts_with("backbone."))
      EXPECT_TRUE(p.value == source.params.at(name).value) << name;
    else if (source.params.contains(name) && p.value.shape() == source.params.at(name).value.shape())
      EXPECT_FALSE(p.value == source.params.at(name).value) << name;
  }
  EXPECT_EQ(params.at("head.fc2.kernel").value.extent(1), 7u);
}

TEST(Transfer, ShapeMismatchNamesTheTensor) {
  ModelConfig cfg;
  Checkpoint source;
  Rng rng(9);
  source.params = init_params(cfg, Strategy::direct, nullptr, rng);
  ModelConfig other = cfg;
  other.backbone.stages[1].channels = 24;
  try {
    init_params(other, Strategy::transfer, &source, rng);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("backbone.conv1."), std::string::npos) << e.what();
  }
  EXPECT_THROW(init_params(cfg, Strategy::transfer, nullptr, rng), ConfigError);
}

TEST(Model, ProbabilityRowsForEveryPoolingChoice) {
  const auto images = random_images(5, 14, 10);
  for (PoolKind pool : {PoolKind::attention, PoolKind::average, PoolKind::max})
    for (ConcatAxis axis : {ConcatAxis::channel, ConcatAxis::batch}) {
      ModelConfig cfg;
      cfg.pool = pool;
      cfg.attention.concat_axis = axis;
      Rng rng(11);
      ModelParams params = init_params(cfg, Strategy::direct, nullptr, rng, InitOptions{0.01, false});
      Tape tape;
      Var probs = model_forward(tape, tape.constant(to_feature_map(images)), params, cfg, false, nullptr);
      EXPECT_EQ(probs.shape(), (Shape{5 * cfg.rows_per_image(), 4}));
      const Tensor p = predict_probs(images, params, cfg);
      ASSERT_EQ(p.shape(), (Shape{5, 4}));
      for (std::size_t i = 0; i < 5; ++i) {
        double total = 0.0;
        for (std::size_t c = 0; c < 4; ++c) total += p.at({i, c});
        EXPECT_NEAR(total, 1.0, 1e-12);
      }
    }
}

TEST(Model, BatchCompositionDoesNotChangeInference) {
  const auto images = random_images(70, 14, 12);
  ModelConfig cfg;
  Rng rng(13);
  ModelParams params = init_params(cfg, Strategy::direct, nullptr, rng, InitOptions{0.01, false});
  const Tensor all = predict_probs(images, params, cfg);
  const Tensor one = predict_probs(std::span<const Image>(images).subspan(66, 1), params, cfg);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(all.at({66, c}), one.at({0, c}), 1e-14);
}

TEST(Model, RejectsWrongInputSize) {
  ModelConfig cfg;
  Rng rng(14);
  ModelParams params = init_params(cfg, Strategy::direct, nullptr, rng);
  const auto images = random_images(1, 16, 15);
  EXPECT_THROW(predict_probs(images, params, cfg), ShapeError);
}

TEST(Model, EnumNamesRoundTrip) {
  for (PoolKind k : {PoolKind::attention, PoolKind::average, PoolKind::max})
    EXPECT_EQ(parse_pool_kind(to_string(k)), k);
  for (Strategy s : {Strategy::direct, Strategy::transfer}) EXPECT_EQ(parse_strategy(to_string(s)), s);
  for (ConcatAxis a : {ConcatAxis::channel, ConcatAxis::batch}) EXPECT_EQ(parse_concat_axis(to_string(a)), a);
  EXPECT_THROW(parse_pool_kind("median"), ConfigError);
}
