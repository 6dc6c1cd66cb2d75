#include <benchmark/benchmark.h>

#include <numeric>

#include "leafkit/ops.h"
#include "leafkit/training.h"

using namespace leafkit;

// One optimizer step (forward, backward, Adam) on a batch of 32 at the given
// resolution; the per-epoch cost is roughly 29 of these at 128 px.
static void BM_TrainStep(benchmark::State& state) {
  const auto arch = state.range(0) == 0 ? Architecture::kBaselineCnn : Architecture::kHybridCnnLstm;
  const auto res = static_cast<std::size_t>(state.range(1));
  Model model = Model::build(spec_for(arch, res), 1);
  AdamState adam = AdamState::for_parameters(model.parameters());
  Rng rng(2);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> pixels(32 * 3 * res * res);
  for (float& v : pixels) v = u(rng);
  const Tensor x = Tensor::from({32, 3, res, res}, std::move(pixels));
  std::vector<int> labels(32);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);
  for (auto _ : state) {
    model.zero_grad();
    ops::softmax_cross_entropy(model.forward(x), labels).backward();
    adam_step(model.parameters(), adam, 1e-3);
  }
  state.SetLabel(std::string(architecture_name(arch)));
}
BENCHMARK(BM_TrainStep)->Args({0, 64})->Args({1, 64})->Args({0, 128})->Args({1, 128})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
