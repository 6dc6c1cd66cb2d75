#include <benchmark/benchmark.h>

#include "leafkit/augment.h"
#include "leafkit/layers.h"
#include "leafkit/ops.h"
#include "leafkit/rng.h"

using namespace leafkit;

namespace {

Tensor uniform(const Shape& shape, Rng& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(shape_numel(shape));
  for (float& x : v) x = u(rng);
  return Tensor::from(shape, std::move(v));
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = uniform({n, n}, rng), b = uniform({n, n}, rng);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(32, 512);

// First block of the trunk at 128 px: 3 -> 32 channels, 3x3, same padding.
static void BM_Conv2dForward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Tensor x = uniform({batch, 3, 128, 128}, rng), w = uniform({32, 3, 3, 3}, rng), b = uniform({32}, rng);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, b, {1, 1, 1, 1}));
}
BENCHMARK(BM_Conv2dForward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_Conv2dForwardBackward(benchmark::State& state) {
  Rng rng(3);
  const Tensor x = uniform({8, 32, 32, 32}, rng);
  Tensor w = uniform({64, 32, 3, 3}, rng), b = uniform({64}, rng);
  w.set_requires_grad(true);
  b.set_requires_grad(true);
  for (auto _ : state) {
    w.zero_grad();
    b.zero_grad();
    ops::sum(ops::conv2d(x, w, b, {1, 1, 1, 1})).backward();
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Unit(benchmark::kMillisecond);

// The hybrid head: sequence length 16 of 64 features into 64 units.
static void BM_LstmForwardBackward(benchmark::State& state) {
  Rng rng(4);
  const LSTMParams p = LSTMParams::create(64, 64, rng);
  const Tensor seq = uniform({32, 16, 64}, rng);
  for (auto _ : state) ops::sum(lstm_forward(seq, p)).backward();
}
BENCHMARK(BM_LstmForwardBackward)->Unit(benchmark::kMillisecond);

static void BM_Rotate(benchmark::State& state) {
  Rng rng(5);
  Image img = Image::filled(500, 500, 0.0f);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : img.pixels) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(augment_rotate(img, 17.0));
}
BENCHMARK(BM_Rotate)->Unit(benchmark::kMillisecond);
