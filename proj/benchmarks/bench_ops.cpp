#include <benchmark/benchmark.h>

#include "fdcnet/ops.hpp"
#include "fdcnet/rng.hpp"

using namespace fdcnet;

namespace {

Tensor filled(Shape shape, std::uint64_t seed, bool requires_grad = false) {
  std::vector<double> v(shape_numel(shape));
  Rng rng(seed);
  for (auto& x : v) x = rng.normal();
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = filled({n, n}, 1), b = filled({n, n}, 2);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(256);

void BM_Conv1d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  auto x = filled({32, c, 128}, 3), w = filled({c, c, 5}, 4);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv1d(x, w, nullptr, 1, 2));
}
BENCHMARK(BM_Conv1d)->Arg(8)->Arg(32);

void BM_Conv1dBackward(benchmark::State& state) {
  auto x = filled({32, 16, 128}, 5, true), w = filled({16, 16, 5}, 6, true);
  for (auto _ : state) {
    GradTape::active().clear();
    backward(ops::mean_axis(ops::mean_axis(ops::mean_axis(ops::conv1d(x, w, nullptr, 1, 2), 2), 1), 0));
    x.zero_grad();
    w.zero_grad();
  }
}
BENCHMARK(BM_Conv1dBackward);

void BM_Dct(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  auto x = filled({32, 32, t}, 7);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ops::dct_forward(x));
}
BENCHMARK(BM_Dct)->Arg(64)->Arg(128)->Arg(256);

}  // namespace
