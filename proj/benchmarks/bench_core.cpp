#include <benchmark/benchmark.h>

#include <random>

#include "faircl/layers.hpp"
#include "faircl/model.hpp"
#include "faircl/strategies.hpp"

namespace {

using namespace faircl;

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(shape);
  for (double& v : t.data()) v = u(rng);
  return t;
}

void BM_ConvForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({8, 32, 32, c}, 1);
  const Tensor w = random_tensor({3, 3, c, c}, 2);
  const Tensor b = random_tensor({c}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d_forward(x, w, &b));
}
BENCHMARK(BM_ConvForward)->Arg(4)->Arg(8)->Arg(16);

void BM_ConvBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({8, 32, 32, c}, 1);
  const Tensor w = random_tensor({3, 3, c, c}, 2);
  const Tensor g = random_tensor({8, 32, 32, c}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d_backward(x, w, g, true));
}
BENCHMARK(BM_ConvBackward)->Arg(4)->Arg(8)->Arg(16);

ModelConfig desk() {
  ModelConfig cfg;
  cfg.input_shape = {32, 32, 3};
  cfg.conv_widths = {8, 16, 16, 32};
  cfg.dense_widths = {64, 32, 16};
  cfg.num_classes = 7;
  return cfg;
}

void BM_TrainStep(benchmark::State& state) {
  const Model model = build_model(desk(), 0);
  const Tensor x = random_tensor({24, 32, 32, 3}, 4);
  const Tensor up(Shape{24, 7}, 1.0 / 24.0);
  std::uint64_t step = 0;
  for (auto _ : state) {
    auto fwd = forward(model, x, {Phase::kTrain, ++step});
    benchmark::DoNotOptimize(backward(fwd.tape, up));
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_Penalty(benchmark::State& state) {
  const Model model = build_model(desk(), 0);
  const ParameterSet& p = model.parameters();
  ParameterSet anchor = p;
  ParameterSet weight = p.zeros_like();
  for (std::size_t e = 0; e < p.size(); ++e) {
    anchor.entry(e).value = random_tensor(p.entry(e).value.shape(), 10 + e);
    weight.entry(e).value = random_tensor(p.entry(e).value.shape(), 100 + e);
  }
  MasState mas{weight, anchor};
  Gradients g = p.zeros_like();
  for (auto _ : state) benchmark::DoNotOptimize(mas_penalty(p, mas, 1.0, &g));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.scalar_count()));
}
BENCHMARK(BM_Penalty);

}  // namespace

BENCHMARK_MAIN();
