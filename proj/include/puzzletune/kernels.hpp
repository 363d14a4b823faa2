#pragma once

#include <cstddef>
#include <span>

// Dense inner loops behind the tensor primitives. `serial` is the reference;
// `omp` splits work across threads by output row so every output element is
// summed in the same order as the reference and results stay bit-identical
// for any thread count. The unqualified entry points dispatch on
// num_threads().
namespace puzzletune::kernels {

void set_num_threads(int threads);
int num_threads() noexcept;

// Strided batch description: item b of A starts at b * stride_a. A stride of
// zero shares one operand across the batch.
struct Batch {
    std::size_t count = 1;
    std::size_t stride_a = 0;
    std::size_t stride_b = 0;
    std::size_t stride_c = 0;
};

// C[m,n] (+)= sum_k A[m,k] B[k,n]
// gemm_nt: B is stored as [n,k]. gemm_tn: A is stored as [k,m].
// With accumulate, each output element is computed fully and then added.
void gemm_nn(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate);
void gemm_nt(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate);
void gemm_tn(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate);
void softmax_rows(std::size_t rows, std::size_t width, std::span<const double> x,
                  std::span<double> y);
void layer_norm_rows(std::size_t rows, std::size_t width, double eps, std::span<const double> x,
                     std::span<double> y, std::span<double> mean, std::span<double> rstd);
void gelu(std::span<const double> x, std::span<double> y);

namespace serial {
void gemm_nn(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate);
void gemm_nt(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate);
void gemm_tn(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate);
void softmax_rows(std::size_t rows, std::size_t width, std::span<const double> x,
                  std::span<double> y);
void layer_norm_rows(std::size_t rows, std::size_t width, double eps, std::span<const double> x,
                     std::span<double> y, std::span<double> mean, std::span<double> rstd);
void gelu(std::span<const double> x, std::span<double> y);
}  // namespace serial

namespace omp {
void gemm_nn(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate);
void gemm_nt(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate);
void gemm_tn(const Batch& batch, std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c,
             bool accumulate);
void softmax_rows(std::size_t rows, std::size_t width, std::span<const double> x,
                  std::span<double> y);
void layer_norm_rows(std::size_t rows, std::size_t width, double eps, std::span<const double> x,
                     std::span<double> y, std::span<double> mean, std::span<double> rstd);
void gelu(std::span<const double> x, std::span<double> y);
}  // namespace omp

}  // namespace puzzletune::kernels
