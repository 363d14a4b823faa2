// Serial reference vs OpenMP kernels on shapes from the encoder's hot loops.

#include <vector>

#include <benchmark/benchmark.h>

#include "puzzletune/kernels.hpp"
#include "puzzletune/rng.hpp"

namespace k = puzzletune::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
    puzzletune::Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = rng.uniform(-1.0, 1.0);
    }
    return v;
}

// Batched attention-score shape: [B*heads, T, d] x [B*heads, T, d]^T.
template <auto Gemm>
void BM_GemmNT(benchmark::State& state) {
    const auto t = static_cast<std::size_t>(state.range(0));
    const std::size_t d = 32;
    const std::size_t count = 32;
    k::set_num_threads(static_cast<int>(state.range(1)));
    const auto a = random_values(count * t * d, 1);
    const auto b = random_values(count * t * d, 2);
    std::vector<double> c(count * t * t);
    const k::Batch batch{count, t * d, t * d, t * t};
    for (auto _ : state) {
        Gemm(batch, t, t, d, a, b, c, false);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * count * t * t * d));
}

// Token projection shape: [rows, k] x [k, n].
template <auto Gemm>
void BM_GemmNN(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const std::size_t kk = 64;
    const std::size_t n = 192;
    k::set_num_threads(static_cast<int>(state.range(1)));
    const auto a = random_values(rows * kk, 3);
    const auto b = random_values(kk * n, 4);
    std::vector<double> c(rows * n);
    const k::Batch batch{1, 0, 0, 0};
    for (auto _ : state) {
        Gemm(batch, rows, n, kk, a, b, c, false);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows * n * kk));
}

template <auto Softmax>
void BM_Softmax(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const std::size_t width = 65;
    k::set_num_threads(static_cast<int>(state.range(1)));
    const auto x = random_values(rows * width, 5);
    std::vector<double> y(x.size());
    for (auto _ : state) {
        Softmax(rows, width, x, y);
        benchmark::DoNotOptimize(y.data());
    }
}

template <auto LayerNorm>
void BM_LayerNorm(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const std::size_t width = 64;
    k::set_num_threads(static_cast<int>(state.range(1)));
    const auto x = random_values(rows * width, 6);
    std::vector<double> y(x.size());
    std::vector<double> mean(rows);
    std::vector<double> rstd(rows);
    for (auto _ : state) {
        LayerNorm(rows, width, 1e-6, x, y, mean, rstd);
        benchmark::DoNotOptimize(y.data());
    }
}

void serial_args(benchmark::internal::Benchmark* b) {
    for (int size : {64, 256, 1024}) {
        b->Args({size, 1});
    }
}

void omp_args(benchmark::internal::Benchmark* b) {
    for (int size : {64, 256, 1024}) {
        for (int threads : {1, 2, 4}) {
            b->Args({size, threads});
        }
    }
}

}  // namespace

BENCHMARK(BM_GemmNT<k::serial::gemm_nt>)->Name("gemm_nt/serial")->Apply(serial_args);
BENCHMARK(BM_GemmNT<k::omp::gemm_nt>)->Name("gemm_nt/omp")->Apply(omp_args)->UseRealTime();
BENCHMARK(BM_GemmNN<k::serial::gemm_nn>)->Name("gemm_nn/serial")->Apply(serial_args);
BENCHMARK(BM_GemmNN<k::omp::gemm_nn>)->Name("gemm_nn/omp")->Apply(omp_args)->UseRealTime();
BENCHMARK(BM_Softmax<k::serial::softmax_rows>)->Name("softmax/serial")->Apply(serial_args);
BENCHMARK(BM_Softmax<k::omp::softmax_rows>)->Name("softmax/omp")->Apply(omp_args)->UseRealTime();
BENCHMARK(BM_LayerNorm<k::serial::layer_norm_rows>)->Name("layer_norm/serial")->Apply(serial_args);
BENCHMARK(BM_LayerNorm<k::omp::layer_norm_rows>)->Name("layer_norm/omp")->Apply(omp_args)->UseRealTime();

BENCHMARK_MAIN();
