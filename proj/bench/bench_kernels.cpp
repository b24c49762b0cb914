// Parallel kernels against their single-threaded references.
#include <benchmark/benchmark.h>

#include "lmtp/mvn.hpp"
#include "lmtp/simulation.hpp"

namespace {

Eigen::MatrixXd equicorrelated(int k, double rho) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(k, k, rho);
  r.diagonal().setOnes();
  return r;
}

void BM_MvnParallel(benchmark::State& state) {
  const lmtp::RectangleProbability g(equicorrelated(static_cast<int>(state.range(0)), 0.5));
  for (auto _ : state) benchmark::DoNotOptimize(g.evaluate(2.2, 1 << 14).estimate);
}

void BM_MvnSerial(benchmark::State& state) {
  const lmtp::RectangleProbability g(equicorrelated(static_cast<int>(state.range(0)), 0.5));
  for (auto _ : state) benchmark::DoNotOptimize(g.evaluate_serial(2.2, 1 << 14).estimate);
}

lmtp::StudyConfig small_study() {
  lmtp::StudyConfig c;
  c.grid = lmtp::StudyGrid{{250}, {0.0}, 4};
  c.learners.regression_learners = {"ols"};
  c.learners.classification_learners = {"logistic"};
  return c;
}

void BM_StudyParallel(benchmark::State& state) {
  const auto config = small_study();
  for (auto _ : state) benchmark::DoNotOptimize(lmtp::run_study(config).cells.size());
}

void BM_StudySerial(benchmark::State& state) {
  const auto config = small_study();
  for (auto _ : state) benchmark::DoNotOptimize(lmtp::run_study_serial(config).cells.size());
}

}  // namespace

BENCHMARK(BM_MvnParallel)->Arg(3)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MvnSerial)->Arg(3)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StudyParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StudySerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
