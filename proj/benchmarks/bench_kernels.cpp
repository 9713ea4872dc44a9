#include <benchmark/benchmark.h>

#include "rsisc/augment.hpp"
#include "rsisc/fusion.hpp"
#include "rsisc/model.hpp"

using namespace rsisc;

namespace {

Tensor uniform_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = uniform01(rng);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Tensor x = uniform_tensor({32, side, side, 16}, 1), k = uniform_tensor({3, 3, 16, 32}, 2),
               b = uniform_tensor({32}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, k, b, 1));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(14)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Tensor x = uniform_tensor({32, side, side, 16}, 1), k = uniform_tensor({3, 3, 16, 32}, 2);
  const Tensor g = uniform_tensor({32, side - 2, side - 2, 32}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d_backward(x, k, 1, g));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_Conv2dBackward)->Arg(8)->Arg(14)->Unit(benchmark::kMillisecond);

void BM_AttentionPoolForwardBackward(benchmark::State& state) {
  const AttentionConfig cfg = AttentionConfig::desk();
  ModelParams params;
  Rng rng(5);
  init_attention_pool(params, "pool", 32, cfg, rng, InitOptions{0.01, false});
  const auto side = static_cast<std::size_t>(state.range(0));
  const Tensor fmap = uniform_tensor({96, side, side, 32}, 6);
  for (auto _ : state) {
    Tape tape;
    tape.backward(ag::sum(attention_pool(tape, tape.leaf(fmap), params, "pool", cfg)));
  }
}
BENCHMARK(BM_AttentionPoolForwardBackward)->Arg(3)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig cfg;
  Rng rng(7);
  ModelParams params = init_params(cfg, Strategy::direct, nullptr, rng, InitOptions{0.01, false});
  const Tensor images = uniform_tensor({96, 14, 14, 3}, 8);
  Tensor targets({96, 4});
  for (std::size_t i = 0; i < 96; ++i) targets.at({i, i % 4}) = 1.0;
  for (auto _ : state) {
    Tape tape;
    Rng dropout(9);
    Var probs = model_forward(tape, tape.constant(images), params, cfg, true, &dropout);
    params.zero_grad();
    tape.backward(kl_loss(tape, probs, targets, params, LossConfig{}));
  }
  state.SetItemsProcessed(state.iterations() * 96);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_MixupExpand(benchmark::State& state) {
  Rng rng(10);
  LabeledBatch batch;
  batch.labels = Tensor({32, 45});
  for (std::size_t i = 0; i < 32; ++i) {
    Image img(224, 224);
    for (double& v : img.pixels) v = uniform01(rng);
    batch.images.push_back(std::move(img));
    batch.labels.at({i, i % 45}) = 1.0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(mixup_expand(batch, MixupConfig{}, rng));
}
BENCHMARK(BM_MixupExpand)->Unit(benchmark::kMillisecond);

void BM_ProdFuse(benchmark::State& state) {
  FusionInput in;
  for (std::int64_t m = 0; m < state.range(0); ++m) {
    Tensor p = uniform_tensor({6300, 45}, 11 + static_cast<std::uint64_t>(m));
    in.model_ids.push_back(std::to_string(m));
    in.probabilities.push_back(normalize_rows(p));
  }
  for (auto _ : state) benchmark::DoNotOptimize(predict_label(prod_fuse(in)));
  state.SetItemsProcessed(state.iterations() * 6300);
}
BENCHMARK(BM_ProdFuse)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
