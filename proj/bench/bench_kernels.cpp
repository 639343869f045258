#include <benchmark/benchmark.h>

#include <random>

#include "mtqa/kernels.hpp"

namespace {

using mtqa::Tensor4;

struct ConvSetup {
  Tensor4 in, out, grad_in;
  std::vector<double> weight, bias, grad_w, grad_b;

  ConvSetup(int n, int cin, int cout, int size)
      : in(n, cin, size, size), out(n, cout, size, size), grad_in(n, cin, size, size),
        weight(static_cast<std::size_t>(cout) * cin * 9), bias(static_cast<std::size_t>(cout)),
        grad_w(weight.size()), grad_b(bias.size()) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> d;
    for (auto& v : in.data) v = d(rng);
    for (auto& v : weight) v = 0.1 * d(rng);
    for (auto& v : bias) v = d(rng);
  }
};

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  ConvSetup s(16, static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), static_cast<int>(state.range(2)));
  for (auto _ : state) {
    if constexpr (Parallel) mtqa::parallel::conv3x3_forward(s.in, s.weight, s.bias, s.out);
    else mtqa::reference::conv3x3_forward(s.in, s.weight, s.bias, s.out);
    benchmark::DoNotOptimize(s.out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * 16);
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  ConvSetup s(16, static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), static_cast<int>(state.range(2)));
  Tensor4 grad_out = s.out;
  for (auto& v : grad_out.data) v = 0.01;
  for (auto _ : state) {
    if constexpr (Parallel) {
      mtqa::parallel::conv3x3_backward_input(grad_out, s.weight, s.grad_in);
      mtqa::parallel::conv3x3_backward_params(s.in, grad_out, s.grad_w, s.grad_b);
    } else {
      mtqa::reference::conv3x3_backward_input(grad_out, s.weight, s.grad_in);
      mtqa::reference::conv3x3_backward_params(s.in, grad_out, s.grad_w, s.grad_b);
    }
    benchmark::DoNotOptimize(s.grad_w.data());
  }
  state.SetItemsProcessed(state.iterations() * 16);
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({1, 16, 64})->Args({16, 32, 32})->Args({32, 64, 16})->Unit(benchmark::kMillisecond);
}

BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->Apply(shapes);
BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/reference")->Apply(shapes);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/parallel")->Apply(shapes);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/reference")->Apply(shapes);

}  // namespace

BENCHMARK_MAIN();
