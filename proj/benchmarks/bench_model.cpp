#include <benchmark/benchmark.h>

#include "fdcnet/feedback.hpp"
#include "fdcnet/model.hpp"
#include "fdcnet/optim.hpp"

using namespace fdcnet;

namespace {

Tensor batch(std::size_t b, std::size_t c, std::uint64_t seed) {
  std::vector<double> v(b * c * 128);
  Rng rng(seed);
  for (auto& x : v) x = rng.normal();
  return Tensor({b, c, 128}, std::move(v));
}

void BM_DeskForward(benchmark::State& state) {
  const auto cfg = ModelConfig::desk();
  FdcNet net(cfg, 1);
  auto x = batch(static_cast<std::size_t>(state.range(0)), cfg.channels, 2);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, {}).x_hat);
}
BENCHMARK(BM_DeskForward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_DeskTrainStep(benchmark::State& state) {
  const auto cfg = ModelConfig::desk();
  FdcNet net(cfg, 1);
  AdamW opt(net.store().params(), {});
  auto noisy = batch(32, cfg.channels, 3), clean = batch(32, cfg.channels, 4);
  std::vector<double> labels(64);
  for (std::size_t i = 0; i < 32; ++i) labels[2 * i + i % 2] = 1.0;
  Tensor y({32, 2}, labels);
  Rng rng(5);
  for (auto _ : state) {
    GradTape::active().clear();
    auto out = net.forward(noisy, {true, &rng});
    backward(feedback::joint_loss(clean, out.x_hat, out.pred.p, y, {}, 0.6).total);
    opt.step();
    opt.zero_grad();
  }
}
BENCHMARK(BM_DeskTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
