// Serial reference vs OpenMP kernels on production-sized inputs.

#include <benchmark/benchmark.h>

#include <random>

#include "stwind/eval.hpp"
#include "stwind/kernels.hpp"
#include "stwind/mesh.hpp"
#include "stwind/model.hpp"
#include "stwind/precision_terms.hpp"
#include "stwind/simulate.hpp"

namespace {

using stwind::Execution;
using stwind::RowMatrix;

Execution mode(const benchmark::State& s) { return s.range(0) == 0 ? Execution::kSerial : Execution::kParallel; }

RowMatrix random_samples(Eigen::Index rows, Eigen::Index cols) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u;
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// 200 farms x 20 lead times, 1000 samples.
const RowMatrix& cube() {
  static const RowMatrix m = random_samples(4000, 1000);
  return m;
}

void BM_Crps(benchmark::State& state) {
  std::vector<double> truth(4000, 0.5), out(4000);
  for (auto _ : state) {
    stwind::kernels::crps_rows(cube(), truth, out, mode(state));
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Crps)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Quantiles(benchmark::State& state) {
  const auto levels = stwind::nominal_levels();
  RowMatrix out;
  for (auto _ : state) {
    stwind::kernels::quantile_rows(cube(), levels, out, mode(state));
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Quantiles)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_NormalDraws(benchmark::State& state) {
  RowMatrix out(1000, 20000);
  for (auto _ : state) {
    stwind::kernels::standard_normal_rows(3, out, mode(state));
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_NormalDraws)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BinomialBars(benchmark::State& state) {
  const auto levels = stwind::nominal_levels();
  RowMatrix out;
  for (auto _ : state) {
    stwind::kernels::binomial_coverage_draws(4000, levels, 10000, 11, out, mode(state));
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_BinomialBars)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// Posterior precision of an ST+T model with 200 farms over 212 steps.
const stwind::LatentGaussianModel& big_model() {
  static const stwind::LatentGaussianModel m = [] {
    const auto locs = stwind::uniform_locations(200, 150.0, 200.0, 5);
    auto domain = std::make_shared<const stwind::SpatialDomain>(stwind::build_mesh(locs, {}));
    stwind::ModelInput input{locs, Eigen::MatrixXd::Random(200, 192)};
    stwind::AssemblyOptions opts;
    opts.horizon = 20;
    return stwind::assemble(stwind::ModelKind::kSTT, input, domain, opts);
  }();
  return m;
}

void BM_CombineTerms(benchmark::State& state) {
  const auto& m = big_model();
  const auto coeffs = m.posterior_coefficients(stwind::Hyperparameters{});
  stwind::SparseMatrix q;
  for (auto _ : state) {
    m.posterior_terms().evaluate_into(coeffs, q, mode(state));
    benchmark::DoNotOptimize(q.valuePtr());
  }
}
BENCHMARK(BM_CombineTerms)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
