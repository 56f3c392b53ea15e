#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "emostress/features.hpp"
#include "emostress/model.hpp"
#include "emostress/nn.hpp"
#include "emostress/pca.hpp"
#include "emostress/rng.hpp"

using namespace emostress;

namespace {

Tensor<float> random_tensor(const Shape& shape, Rng& rng) {
  Tensor<float> t(shape);
  for (auto& v : t.data) v = static_cast<float>(rng.normal());
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  Rng rng(1);
  const auto in_c = static_cast<std::size_t>(state.range(0));
  const auto out_c = static_cast<std::size_t>(state.range(1));
  const auto h = static_cast<std::size_t>(state.range(2));
  const auto w = static_cast<std::size_t>(state.range(3));
  const auto x = random_tensor({in_c, h, w}, rng);
  const auto k = random_tensor({out_c, in_c, 3, 3}, rng);
  const auto b = random_tensor({out_c}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_forward(x, k, b, nn::Padding::Same));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(out_c * in_c * 9 * h * w));
}
BENCHMARK(BM_Conv2dForward)->Args({1, 16, 199, 39})->Args({16, 32, 99, 19})->Args({32, 32, 49, 9});

void BM_FeatureExtraction(benchmark::State& state) {
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.resize(static_cast<std::size_t>(state.range(0)) * 16000);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) clip.samples[i] = 0.4 * std::sin(2 * std::numbers::pi * 220.0 * i / 16000.0);
  const FeatureConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(clip, cfg));
}
BENCHMARK(BM_FeatureExtraction)->Arg(2)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_ForwardPass(benchmark::State& state) {
  const auto model = EmoCnn::build(ModelConfig{});
  Rng rng(2);
  const auto x = random_tensor({1, 199, 39}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x));
}
BENCHMARK(BM_ForwardPass)->Unit(benchmark::kMillisecond);

void BM_TrainingStep(benchmark::State& state) {
  const auto model = EmoCnn::build(ModelConfig{});
  Rng rng(3);
  const auto x = random_tensor({1, 199, 39}, rng);
  auto grads = model.parameters();
  for (auto _ : state) {
    for (auto& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0f);
    benchmark::DoNotOptimize(model.accumulate_gradients(x, 3, {}, grads, nullptr));
  }
}
BENCHMARK(BM_TrainingStep)->Unit(benchmark::kMillisecond);

void BM_JacobiEigen(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(jacobi_eigen(a));
}
BENCHMARK(BM_JacobiEigen)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
