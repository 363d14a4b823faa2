#include <gtest/gtest.h>

#include <cstring>

#include "puzzletune/kernels.hpp"
#include "puzzletune/rng.hpp"

using namespace puzzletune;

namespace {

std::vector<double> random_vector(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) {
        x = rng.uniform(-2.0, 2.0);
    }
    return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

class KernelParity : public ::testing::TestWithParam<int> {
protected:
    void SetUp() override { omp_threads_ = GetParam(); }
    void TearDown() override { kernels::set_num_threads(1); }
    int omp_threads_ = 1;
};

}  // namespace

TEST_P(KernelParity, GemmVariantsMatchSerialBitForBit) {
    Rng rng(static_cast<std::uint64_t>(GetParam()));
    const std::size_t count = 3, m = 17, n = 13, k = 11;
    const auto a = random_vector(count * m * k, rng);
    const auto b = random_vector(count * k * n, rng);
    const auto seed = random_vector(count * m * n, rng);
    kernels::Batch batch{count, m * k, k * n, m * n};

    for (bool accumulate : {false, true}) {
        auto ref = seed;
        auto par = seed;
        kernels::serial::gemm_nn(batch, m, n, k, a, b, ref, accumulate);
        kernels::set_num_threads(omp_threads_);
        kernels::omp::gemm_nn(batch, m, n, k, a, b, par, accumulate);
        EXPECT_TRUE(bit_equal(ref, par));

        // B reinterpreted as [n,k] and A as [k,m].
        ref = seed;
        par = seed;
        kernels::serial::gemm_nt(batch, m, n, k, a, b, ref, accumulate);
        kernels::omp::gemm_nt(batch, m, n, k, a, b, par, accumulate);
        EXPECT_TRUE(bit_equal(ref, par));

        ref = seed;
        par = seed;
        kernels::serial::gemm_tn(batch, m, n, k, a, b, ref, accumulate);
        kernels::omp::gemm_tn(batch, m, n, k, a, b, par, accumulate);
        EXPECT_TRUE(bit_equal(ref, par));
    }
}

TEST_P(KernelParity, RowKernelsMatchSerialBitForBit) {
    Rng rng(100 + static_cast<std::uint64_t>(GetParam()));
    const std::size_t rows = 37, width = 19;
    const auto x = random_vector(rows * width, rng);
    std::vector<double> ref(x.size()), par(x.size());
    kernels::serial::softmax_rows(rows, width, x, ref);
    kernels::set_num_threads(omp_threads_);
    kernels::omp::softmax_rows(rows, width, x, par);
    EXPECT_TRUE(bit_equal(ref, par));

    std::vector<double> mr(rows), rr(rows), mp(rows), rp(rows);
    kernels::serial::layer_norm_rows(rows, width, 1e-6, x, ref, mr, rr);
    kernels::omp::layer_norm_rows(rows, width, 1e-6, x, par, mp, rp);
    EXPECT_TRUE(bit_equal(ref, par));
    EXPECT_TRUE(bit_equal(rr, rp));

    kernels::serial::gelu(x, ref);
    kernels::omp::gelu(x, par);
    EXPECT_TRUE(bit_equal(ref, par));
}

INSTANTIATE_TEST_SUITE_P(Threads, KernelParity, ::testing::Values(1, 2, 4));

TEST(Kernels, GemmAgainstNaiveTripleLoop) {
    Rng rng(5);
    const std::size_t m = 4, n = 3, k = 5;
    const auto a = random_vector(m * k, rng);
    const auto b = random_vector(k * n, rng);
    std::vector<double> c(m * n);
    kernels::serial::gemm_nn({}, m, n, k, a, b, c, false);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) {
                s += a[i * k + kk] * b[kk * n + j];
            }
            EXPECT_NEAR(c[i * n + j], s, 1e-14);
        }
    }
}

TEST(Kernels, DispatchHonoursThreadSetting) {
    kernels::set_num_threads(0);
    EXPECT_EQ(kernels::num_threads(), 1);
    kernels::set_num_threads(3);
    EXPECT_EQ(kernels::num_threads(), 3);
    kernels::set_num_threads(1);
}
