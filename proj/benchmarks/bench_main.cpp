#include <benchmark/benchmark.h>

#include "edngtm/dcp.hpp"
#include "edngtm/metrics.hpp"
#include "edngtm/net.hpp"
#include "edngtm/ops.hpp"
#include "edngtm/rng.hpp"
#include "edngtm/trainer.hpp"

using namespace edngtm;

namespace {

ImageBuf noise_image(int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  ImageBuf img(h, w, c);
  for (float& v : img.values()) v = static_cast<float>(rng.uniform());
  return img;
}

Tensor<float> noise_tensor(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(shape);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

void BM_Conv2d3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), size = static_cast<int>(state.range(1));
  const auto x = noise_tensor({1, c, size, size}, 1);
  const auto k = noise_tensor({c, c, 3, 3}, 2);
  const Tensor<float> b({c});
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, k, b, 1));
  state.SetItemsProcessed(state.iterations() * int64_t{c} * c * 9 * size * size);
}
BENCHMARK(BM_Conv2d3x3)->Args({16, 64})->Args({32, 64})->Args({64, 128})->Unit(benchmark::kMillisecond);

void BM_DcpDehaze(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const ImageBuf img = noise_image(size, size, 3, 3);
  for (auto _ : state) benchmark::DoNotOptimize(dcp::dcp_dehaze(img));
}
BENCHMARK(BM_DcpDehaze)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_GuidedFilter(benchmark::State& state) {
  const ImageBuf guide = noise_image(256, 256, 1, 4), src = noise_image(256, 256, 1, 5);
  for (auto _ : state) benchmark::DoNotOptimize(dcp::guided_filter(guide, src, static_cast<int>(state.range(0)), 1e-3));
}
BENCHMARK(BM_GuidedFilter)->Arg(8)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_GeneratorForward(benchmark::State& state) {
  net::NetSpec spec = net::NetSpec::toy();
  spec.base_width = static_cast<int>(state.range(0));
  const int size = static_cast<int>(state.range(1));
  const auto g = net::build_generator(spec, 1);
  const auto rgb = noise_tensor({1, 3, size, size}, 6), guide = noise_tensor({1, 1, size, size}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(net::generate(g, rgb, &guide));
}
BENCHMARK(BM_GeneratorForward)->Args({8, 64})->Args({16, 128})->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  train::TrainConfig cfg;
  cfg.net = net::NetSpec::toy();
  cfg.input_size = 64;
  cfg.epochs = 2;
  const train::SamplePair pair{noise_image(64, 64, 3, 8), noise_image(64, 64, 3, 9),
                               to_field<TransmissionMap>(noise_image(64, 64, 1, 10))};
  train::Trainer trainer(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(std::span(&pair, 1), 1e-4));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const ImageBuf a = noise_image(size, size, 3, 11), b = noise_image(size, size, 3, 12);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
