#include <benchmark/benchmark.h>

#include "gthmc/gthmc.hpp"

using namespace gthmc;

namespace {

Vector point(Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  return standard_normal(rng, d);
}

void BM_Gradient(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  auto t = make_donut(d, 0.5);
  const Vector theta = point(d, 1) + Vector::Constant(d, 1.0);
  Vector g;
  for (auto _ : state) benchmark::DoNotOptimize(t->log_density_and_grad(theta, g));
}
BENCHMARK(BM_Gradient)->Arg(2)->Arg(25)->Arg(100);

void BM_AdaptiveStep(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  auto t = make_standard_gaussian(d);
  Vector u = Vector::Unit(d, 0);
  const TemperedMetric m = state.range(1) ? TemperedMetric::directional(t, 10.0, 1.0, u)
                                          : TemperedMetric::isometric(t, 10.0);
  Rng rng(2);
  const MetricPoint pt = evaluate(m, 0.2 * point(d, 3));
  const Vector v = momentum_to_velocity(m, pt, sample_momentum(m, pt, rng));
  for (auto _ : state) benchmark::DoNotOptimize(adaptive_step(m, pt, v, 0.05));
}
BENCHMARK(BM_AdaptiveStep)->Args({2, 0})->Args({2, 1})->Args({25, 0})->Args({25, 1})
    ->Args({100, 1});

void BM_KahanSolve(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  auto t = make_standard_gaussian(d);
  const TemperedMetric m = TemperedMetric::directional(t, 10.0, 0.75, Vector::Unit(d, 0));
  const Vector theta = 0.2 * point(d, 4), v = point(d, 5), rhs = point(d, 6);
  for (auto _ : state) benchmark::DoNotOptimize(solve_kahan_system(m, theta, v, 0.05, rhs));
}
BENCHMARK(BM_KahanSolve)->Arg(2)->Arg(25)->Arg(100)->Arg(400);

void BM_NutsIteration(benchmark::State& state) {
  auto t = make_bimodal(4.0, 0, 2);
  Vector theta = t->means().front();
  Rng rng(7);
  for (auto _ : state) benchmark::DoNotOptimize(nuts_iteration(*t, 0.5, theta, rng));
}
BENCHMARK(BM_NutsIteration);

void BM_VltChmcIteration(benchmark::State& state) {
  auto t = make_bimodal(4.0, 0, 2);
  const TemperedMetric m =
      TemperedMetric::directional(t, 20.0, 1.0, Vector::Unit(2, 0));
  Vector theta = t->means().front();
  Rng rng(8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vlt_chmc_iteration(m, 0.1, 2.0, theta, rng, VltOptions{}, nullptr));
  }
}
BENCHMARK(BM_VltChmcIteration);

void BM_EssGeyer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(9);
  std::normal_distribution<double> normal;
  std::vector<double> x(n);
  x[0] = normal(rng);
  for (std::size_t i = 1; i < n; ++i) x[i] = 0.9 * x[i - 1] + normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(ess_geyer(x, 0.0));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n));
}
BENCHMARK(BM_EssGeyer)->Arg(1 << 10)->Arg(10000)->Arg(1 << 17);

}  // namespace

BENCHMARK_MAIN();
