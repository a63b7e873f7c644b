#include <benchmark/benchmark.h>

#include "crlprune/pruning.hpp"

using namespace crlprune;

static void BM_MaskFromSparsity(benchmark::State& state) {
  Rng rng(3);
  std::vector<double> norms(static_cast<std::size_t>(state.range(0)));
  for (double& v : norms) v = rng.uniform(0.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mask_from_sparsity(norms, 0.5));
  }
}
BENCHMARK(BM_MaskFromSparsity)->Arg(16)->Arg(64)->Arg(512);

static void BM_CostFractions(benchmark::State& state) {
  Rng rng(4);
  Network net(InputShape{3, 8, 8}, {{8, 3, 1, 0}, {16, 3, 1, 0}, {16, 3, 1, 0}}, {}, 2, rng);
  Masks masks;
  for (const ConvLayer& l : net.conv_layers()) {
    masks.push_back(mask_from_sparsity(filter_norms(l.weight), 0.5));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(remaining_param_fraction(net, masks));
    benchmark::DoNotOptimize(flops_fraction(net, masks));
  }
}
BENCHMARK(BM_CostFractions);

static void BM_FilterNorms(benchmark::State& state) {
  Rng rng(5);
  Tensor w = Tensor::zeros({static_cast<int>(state.range(0)), 16, 3, 3});
  for (double& v : w.data) v = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(filter_norms(w));
  }
}
BENCHMARK(BM_FilterNorms)->Arg(16)->Arg(64);

BENCHMARK_MAIN();
