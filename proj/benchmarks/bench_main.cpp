#include <benchmark/benchmark.h>

#include <random>

#include <drmatch/drmatch.hpp>

using namespace drmatch;

namespace {

Matrix gaussian_matrix(Index n, Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix x(n, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i) x(i, j) = normal(rng);
  return x;
}

Vector sparse_response(const Matrix& x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector y(x.rows());
  for (Index i = 0; i < x.rows(); ++i) y[i] = x(i, 0) - 0.5 * x(i, 1) + 0.25 * x(i, 2) + normal(rng);
  return y;
}

void BM_GaussianPath(benchmark::State& state) {
  const Matrix x = gaussian_matrix(state.range(0), state.range(1), 1);
  const Vector y = sparse_response(x, 2);
  const DesignMatrix design(x);
  const std::vector<double> grid = lambda_path(design, y, Family::gaussian, 100, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(fit_path(design, y, Family::gaussian, grid));
}
BENCHMARK(BM_GaussianPath)->Args({200, 100})->Args({200, 1000})->Args({1000, 100})->Unit(benchmark::kMillisecond);

void BM_BinomialPath(benchmark::State& state) {
  const Matrix x = gaussian_matrix(state.range(0), state.range(1), 3);
  const Vector eta = sparse_response(x, 4);
  Vector y(eta.size());
  for (Index i = 0; i < eta.size(); ++i) y[i] = eta[i] > 0.0 ? 1.0 : 0.0;
  const DesignMatrix design(x);
  const std::vector<double> grid = lambda_path(design, y, Family::binomial, 100, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(fit_path(design, y, Family::binomial, grid));
}
BENCHMARK(BM_BinomialPath)->Args({200, 100})->Args({200, 1000})->Unit(benchmark::kMillisecond);

void BM_Matching(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix z = gaussian_matrix(n, 2, 5);
  Treatment w(n);
  for (Index i = 0; i < n; ++i) w[i] = i % 3 == 0 ? 1 : 0;
  MatchSpec spec;
  spec.m = static_cast<int>(state.range(1));
  spec.caliper_sd = 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(build_matches(z, w, spec));
}
BENCHMARK(BM_Matching)->Args({200, 1})->Args({2000, 1})->Args({2000, 3})->Unit(benchmark::kMicrosecond);

void BM_Replication(benchmark::State& state) {
  const ScenarioSpec spec = make_scenario(Form::linear_31, state.range(0), state.range(1), 7);
  const Replication r = generate(spec, 0);
  const std::vector<EstimatorId> ids = {EstimatorId::drme};
  for (auto _ : state) benchmark::DoNotOptimize(run_estimators(r.data, ids, EstimatorConfig{}, 1));
}
BENCHMARK(BM_Replication)->Args({200, 100})->Args({200, 1000})->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
