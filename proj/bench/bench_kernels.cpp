#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "cyclehash/kernels.hpp"

namespace {

using namespace cyclehash;

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<double> v(n);
  for (auto& x : v) x = gauss(rng);
  return v;
}

template <class Gemm>
void run_gemm(benchmark::State& state, Gemm gemm) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vector(n * n, 1);
  const auto b = random_vector(n * n, 2);
  std::vector<double> c(n * n);
  const kernels::GemmArgs args{false, false, n, n, n, false};
  for (auto _ : state) {
    gemm(args, a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

void BM_GemmSerial(benchmark::State& state) {
  run_gemm(state, [](auto&&... a) { kernels::serial::gemm(a...); });
}
void BM_GemmParallel(benchmark::State& state) {
  run_gemm(state, [](auto&&... a) { kernels::parallel::gemm(a...); });
}

template <class Hamming>
void run_hamming(benchmark::State& state, Hamming hamming) {
  const auto n = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t kWords = 1;
  std::mt19937_64 rng(3);
  std::vector<std::uint64_t> db(n * kWords);
  for (auto& w : db) w = rng();
  const std::vector<std::uint64_t> query{rng()};
  std::vector<std::uint32_t> out(n);
  for (auto _ : state) {
    hamming(query, db, kWords, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_HammingSerial(benchmark::State& state) {
  run_hamming(state, [](auto&&... a) { kernels::serial::hamming_row(a...); });
}
void BM_HammingParallel(benchmark::State& state) {
  run_hamming(state, [](auto&&... a) { kernels::parallel::hamming_row(a...); });
}

}  // namespace

BENCHMARK(BM_GemmSerial)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_GemmParallel)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_HammingSerial)->Arg(1 << 12)->Arg(1 << 16);
BENCHMARK(BM_HammingParallel)->Arg(1 << 12)->Arg(1 << 16);

BENCHMARK_MAIN();
