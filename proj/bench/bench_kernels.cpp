// Serial vs OpenMP kernels. Both paths produce bit-identical results; this
// measures only the speed difference. Set OMP_NUM_THREADS to vary workers.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "brainage/kernels.hpp"
#include "brainage/rng.hpp"

using namespace brainage;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed, 0);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

RealVector random_ages(std::size_t n) {
  Rng rng(99, 0);
  RealVector a(n);
  for (double& v : a) v = rng.uniform(8.0, 95.0);
  return a;
}

template <Matrix (*Fn)(const Matrix&, const Matrix&)>
void bm_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b));
  state.counters["threads"] = omp_get_max_threads();
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <kernels::PairwiseTerms (*Fn)(const Matrix&, std::span<const double>, double)>
void bm_order(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix x = random_matrix(n, 64, 3);
  for (double& v : x.values()) v *= 0.1;
  const RealVector ages = random_ages(n);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x, ages, 1.0));
  state.counters["threads"] = omp_get_max_threads();
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

}  // namespace

BENCHMARK(bm_matmul<kernels::serial::matmul>)->Name("matmul/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_matmul<kernels::matmul>)->Name("matmul/openmp")->Arg(64)->Arg(128)->Arg(256)->UseRealTime();
BENCHMARK(bm_order<kernels::serial::order_pairwise>)->Name("order_pairwise/serial")->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(bm_order<kernels::order_pairwise>)->Name("order_pairwise/openmp")->Arg(64)->Arg(256)->Arg(1024)->UseRealTime();

BENCHMARK_MAIN();
