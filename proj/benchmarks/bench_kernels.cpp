#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "protoaudio/autodiff.hpp"
#include "protoaudio/backbone.hpp"
#include "protoaudio/features.hpp"
#include "protoaudio/rng.hpp"

using namespace protoaudio;
using ad::Tensor;

namespace {

Tensor random_tensor(ad::Shape shape, SplitMix64& gen, bool requires_grad = false) {
  std::vector<double> data(ad::numel(shape));
  for (double& v : data) v = standard_normal(gen);
  return Tensor::from(std::move(shape), std::move(data), requires_grad);
}

// args: spatial size, channels
void BM_Conv2dForward(benchmark::State& state) {
  const auto hw = static_cast<std::size_t>(state.range(0));
  const auto ch = static_cast<std::size_t>(state.range(1));
  SplitMix64 gen(1);
  const Tensor x = random_tensor({4, ch, hw, hw}, gen);
  const Tensor w = random_tensor({ch, ch, 3, 3}, gen);
  const Tensor b = random_tensor({ch}, gen);
  ad::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ad::conv2d(x, w, b, 1, 1));
}
BENCHMARK(BM_Conv2dForward)->Args({56, 16})->Args({28, 32})->Args({14, 64})->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto hw = static_cast<std::size_t>(state.range(0));
  const auto ch = static_cast<std::size_t>(state.range(1));
  SplitMix64 gen(2);
  for (auto _ : state) {
    state.PauseTiming();
    const Tensor x = random_tensor({4, ch, hw, hw}, gen, true);
    const Tensor w = random_tensor({ch, ch, 3, 3}, gen, true);
    const Tensor b = Tensor::zeros({ch}, true);
    const Tensor loss = ad::sum(ad::conv2d(x, w, b, 1, 1));
    state.ResumeTiming();
    ad::backward(loss);
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({56, 16})->Args({14, 64})->Unit(benchmark::kMillisecond);

void BM_MelSpectrogram(benchmark::State& state) {
  FeatureParams params;
  params.target_height = params.target_width = static_cast<std::size_t>(state.range(0));
  AudioClip clip;
  clip.samples.resize(22050);
  for (std::size_t n = 0; n < clip.samples.size(); ++n)
    clip.samples[n] = 0.5 * std::sin(2 * std::numbers::pi * 1000.0 * static_cast<double>(n) / 22050.0);
  for (auto _ : state) benchmark::DoNotOptimize(mel_spectrogram(clip, params));
}
BENCHMARK(BM_MelSpectrogram)->Arg(64)->Arg(224)->Unit(benchmark::kMillisecond);

void BM_EmbedBatch(benchmark::State& state) {
  BackboneConfig cfg;
  cfg.input_height = cfg.input_width = static_cast<std::size_t>(state.range(0));
  const ParamSet params = init_params(cfg, 3);
  SplitMix64 gen(4);
  const Tensor x = random_tensor({8, 1, cfg.input_height, cfg.input_width}, gen);
  ad::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(embed(x, params, cfg));
}
BENCHMARK(BM_EmbedBatch)->Arg(64)->Arg(224)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
