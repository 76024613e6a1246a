#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "spdnet/nn.hpp"
#include "spdnet/ops.hpp"
#include "spdnet/pdm.hpp"
#include "spdnet/periods.hpp"

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

spdnet::Tensor periodic_batch(std::size_t b, std::size_t s, std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> noise(-0.2, 0.2);
  std::vector<double> values(b * s * n);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t t = (i / n) % s;
    values[i] = std::sin(kTwoPi * 4.0 * t / static_cast<double>(s)) + noise(rng);
  }
  return spdnet::Tensor({b, s, n}, std::move(values));
}

spdnet::ModelConfig default_config(std::size_t s) {
  spdnet::ModelConfig cfg;
  cfg.seq_len = s;
  cfg.pred_len = 24;
  cfg.channels = 1;
  return cfg;
}

}  // namespace

static void BM_ComputeSpectrum(benchmark::State& state) {
  const std::size_t s = static_cast<std::size_t>(state.range(0));
  spdnet::Tensor x = periodic_batch(32, s, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(spdnet::compute_spectrum(x));
  }
}
BENCHMARK(BM_ComputeSpectrum)->Arg(96)->Arg(384)->Arg(720);

static void BM_FoldUnfold(benchmark::State& state) {
  const std::size_t s = static_cast<std::size_t>(state.range(0));
  spdnet::Tensor x = periodic_batch(32, s, 1);
  const spdnet::PeriodEntry entry{4, (s + 3) / 4, 1.0};
  for (auto _ : state) {
    spdnet::Folded folded = spdnet::fold(x, entry);
    benchmark::DoNotOptimize(spdnet::unfold(folded));
  }
}
BENCHMARK(BM_FoldUnfold)->Arg(96)->Arg(720);

static void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> a(n * n), b(n * n);
  for (double& v : a) v = dist(rng);
  for (double& v : b) v = dist(rng);
  spdnet::Tensor ta({n, n}, a), tb({n, n}, b);
  for (auto _ : state) {
    benchmark::DoNotOptimize(spdnet::matmul(ta, tb));
  }
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

static void BM_ForwardPass(benchmark::State& state) {
  spdnet::ModelConfig cfg = default_config(96);
  spdnet::SpdNet model(cfg);
  spdnet::Tensor x = periodic_batch(32, cfg.seq_len, cfg.channels);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(x));
  }
}
BENCHMARK(BM_ForwardPass);

static void BM_TrainStep(benchmark::State& state) {
  spdnet::ModelConfig cfg = default_config(96);
  spdnet::SpdNet model(cfg);
  spdnet::Adam opt(model.parameters(), cfg.learning_rate);
  spdnet::Tensor x = periodic_batch(32, cfg.seq_len, cfg.channels);
  spdnet::Tensor target = periodic_batch(32, cfg.pred_len, cfg.channels);
  for (auto _ : state) {
    spdnet::Tensor diff = spdnet::sub(model.forward(x), target);
    spdnet::Tensor loss = spdnet::mean_all(spdnet::mul(diff, diff));
    loss.backward();
    opt.step();
    opt.zero_grad();
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_TrainStep);

BENCHMARK_MAIN();
