#include "kernel_rows.hpp"

namespace puzzletune::kernels::serial {

void gemm_nn(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate) {
    for (std::size_t bi = 0; bi < batch.count; ++bi) {
        for (std::size_t i = 0; i < m; ++i) {
            rows::nn(a.data() + bi * batch.stride_a + i * k, b.data() + bi * batch.stride_b,
                     c.data() + bi * batch.stride_c + i * n, n, k, accumulate);
        }
    }
}

void gemm_nt(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate) {
    for (std::size_t bi = 0; bi < batch.count; ++bi) {
        for (std::size_t i = 0; i < m; ++i) {
            rows::nt(a.data() + bi * batch.stride_a + i * k, b.data() + bi * batch.stride_b,
                     c.data() + bi * batch.stride_c + i * n, n, k, accumulate);
        }
    }
}

void gemm_tn(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate) {
    for (std::size_t bi = 0; bi < batch.count; ++bi) {
        for (std::size_t i = 0; i < m; ++i) {
            rows::tn(a.data() + bi * batch.stride_a, i, m, b.data() + bi * batch.stride_b,
                     c.data() + bi * batch.stride_c + i * n, n, k, accumulate);
        }
    }
}

void softmax_rows(std::size_t rows_count, std::size_t width, std::span<const double> x,
                  std::span<double> y) {
    for (std::size_t r = 0; r < rows_count; ++r) {
        rows::softmax(x.data() + r * width, y.data() + r * width, width);
    }
}

void layer_norm_rows(std::size_t rows_count, std::size_t width, double eps,
                     std::span<const double> x, std::span<double> y, std::span<double> mean,
                     std::span<double> rstd) {
    for (std::size_t r = 0; r < rows_count; ++r) {
        rows::layer_norm(x.data() + r * width, y.data() + r * width, width, eps, mean[r], rstd[r]);
    }
}

void gelu(std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = rows::gelu(x[i]);
    }
}

}  // namespace puzzletune::kernels::serial
