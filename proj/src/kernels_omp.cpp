#include <omp.h>

#include <cstdint>

#include "kernel_rows.hpp"

namespace puzzletune::kernels {
namespace {

int g_threads = 1;

using Index = std::int64_t;

Index as_index(std::size_t n) { return static_cast<Index>(n); }

}  // namespace

void set_num_threads(int threads) {
    g_threads = threads < 1 ? 1 : threads;
    omp_set_num_threads(g_threads);
}

int num_threads() noexcept { return g_threads; }

namespace omp {

void gemm_nn(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate) {
    const Index total = as_index(batch.count * m);
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < total; ++r) {
        const std::size_t bi = static_cast<std::size_t>(r) / m;
        const std::size_t i = static_cast<std::size_t>(r) % m;
        rows::nn(a.data() + bi * batch.stride_a + i * k, b.data() + bi * batch.stride_b,
                 c.data() + bi * batch.stride_c + i * n, n, k, accumulate);
    }
}

void gemm_nt(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate) {
    const Index total = as_index(batch.count * m);
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < total; ++r) {
        const std::size_t bi = static_cast<std::size_t>(r) / m;
        const std::size_t i = static_cast<std::size_t>(r) % m;
        rows::nt(a.data() + bi * batch.stride_a + i * k, b.data() + bi * batch.stride_b,
                 c.data() + bi * batch.stride_c + i * n, n, k, accumulate);
    }
}

void gemm_tn(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate) {
    const Index total = as_index(batch.count * m);
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < total; ++r) {
        const std::size_t bi = static_cast<std::size_t>(r) / m;
        const std::size_t i = static_cast<std::size_t>(r) % m;
        rows::tn(a.data() + bi * batch.stride_a, i, m, b.data() + bi * batch.stride_b,
                 c.data() + bi * batch.stride_c + i * n, n, k, accumulate);
    }
}

void softmax_rows(std::size_t rows_count, std::size_t width, std::span<const double> x,
                  std::span<double> y) {
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < as_index(rows_count); ++r) {
        const std::size_t off = static_cast<std::size_t>(r) * width;
        rows::softmax(x.data() + off, y.data() + off, width);
    }
}

void layer_norm_rows(std::size_t rows_count, std::size_t width, double eps,
                     std::span<const double> x, std::span<double> y, std::span<double> mean,
                     std::span<double> rstd) {
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < as_index(rows_count); ++r) {
        const auto ur = static_cast<std::size_t>(r);
        rows::layer_norm(x.data() + ur * width, y.data() + ur * width, width, eps, mean[ur],
                         rstd[ur]);
    }
}

void gelu(std::span<const double> x, std::span<double> y) {
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < as_index(x.size()); ++i) {
        y[static_cast<std::size_t>(i)] = rows::gelu(x[static_cast<std::size_t>(i)]);
    }
}

}  // namespace omp

void gemm_nn(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate) {
    if (g_threads > 1) {
        omp::gemm_nn(batch, m, n, k, a, b, c, accumulate);
    } else {
        serial::gemm_nn(batch, m, n, k, a, b, c, accumulate);
    }
}

void gemm_nt(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate) {
    if (g_threads > 1) {
        omp::gemm_nt(batch, m, n, k, a, b, c, accumulate);
    } else {
        serial::gemm_nt(batch, m, n, k, a, b, c, accumulate);
    }
}

void gemm_tn(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate) {
    if (g_threads > 1) {
        omp::gemm_tn(batch, m, n, k, a, b, c, accumulate);
    } else {
        serial::gemm_tn(batch, m, n, k, a, b, c, accumulate);
    }
}

void softmax_rows(std::size_t rows_count, std::size_t width, std::span<const double> x,
                  std::span<double> y) {
    if (g_threads > 1) {
        omp::softmax_rows(rows_count, width, x, y);
    } else {
        serial::softmax_rows(rows_count, width, x, y);
    }
}

void layer_norm_rows(std::size_t rows_count, std::size_t width, double eps,
                     std::span<const double> x, std::span<double> y, std::span<double> mean,
                     std::span<double> rstd) {
    if (g_threads > 1) {
        omp::layer_norm_rows(rows_count, width, eps, x, y, mean, rstd);
    } else {
        serial::layer_norm_rows(rows_count, width, eps, x, y, mean, rstd);
    }
}

void gelu(std::span<const double> x, std::span<double> y) {
    if (g_threads > 1) {
        omp::gelu(x, y);
    } else {
        serial::gelu(x, y);
    }
}

}  // namespace puzzletune::kernels
