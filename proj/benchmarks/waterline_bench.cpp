#include <benchmark/benchmark.h>

#include <random>

#include "waterline/pipeline.hpp"
#include "waterline/stats.hpp"
#include "waterline/synth.hpp"

namespace {

void BM_DetectWaterline(benchmark::State& state) {
  const auto batch = waterline::generate_batch(8, waterline::SynthBounds{}, 1);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(waterline::detect_waterline(batch[i++ % batch.size()].mask, {}));
  }
}
BENCHMARK(BM_DetectWaterline);

std::vector<std::vector<double>> random_groups(std::size_t groups, std::size_t per_group) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> d(0.0, 1.5);
  std::vector<std::vector<double>> g(groups, std::vector<double>(per_group));
  for (auto& v : g) {
    for (auto& x : v) x = std::round(d(rng) * 10) / 10;
  }
  return g;
}

void BM_KruskalWallis(benchmark::State& state) {
  const auto g = random_groups(7, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(waterline::kruskal_wallis(g));
}
BENCHMARK(BM_KruskalWallis)->Arg(48)->Arg(1000);

void BM_CalibrateU(benchmark::State& state) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> h(0.0, 1.48), a(0.0, 0.2);
  waterline::DeviationTable t;
  for (int i = 0; i < state.range(0); ++i) t.push_back({"i", "e", h(rng), a(rng)});
  const auto s = waterline::pooled_sigma(t);
  for (auto _ : state) {
    benchmark::DoNotOptimize(waterline::calibrate_u(t, s.sigma_h, s.sigma_alpha, 0.95));
  }
}
BENCHMARK(BM_CalibrateU)->Arg(828)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
