#pragma once

// Per-row bodies shared by the serial and OpenMP kernels. Both variants call
// exactly these functions, so the floating-point operation order per output
// element is identical and only the row-to-thread assignment differs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "puzzletune/kernels.hpp"

namespace puzzletune::kernels::rows {

inline std::vector<double>& scratch(std::size_t n) {
    static thread_local std::vector<double> buffer;
    buffer.assign(n, 0.0);
    return buffer;
}

// c_row[n] (+)= a_row[k] * b[k,n]
inline void nn(const double* a_row, const double* b, double* c_row, std::size_t n, std::size_t k,
               bool accumulate) {
    double* out = accumulate ? scratch(n).data() : c_row;
    if (!accumulate) {
        std::fill(c_row, c_row + n, 0.0);
    }
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double a = a_row[kk];
        const double* b_row = b + kk * n;
        for (std::size_t j = 0; j < n; ++j) {
            out[j] += a * b_row[j];
        }
    }
    if (accumulate) {
        for (std::size_t j = 0; j < n; ++j) {
            c_row[j] += out[j];
        }
    }
}

// c_row[n] (+)= a_row[k] * b[n,k]^T
inline void nt(const double* a_row, const double* b, double* c_row, std::size_t n, std::size_t k,
               bool accumulate) {
    for (std::size_t j = 0; j < n; ++j) {
        const double* b_row = b + j * k;
        double sum = 0.0;
        for (std::size_t kk = 0; kk < k; ++kk) {
            sum += a_row[kk] * b_row[kk];
        }
        c_row[j] = accumulate ? c_row[j] + sum : sum;
    }
}

// Row i of A[k,m]^T * B[k,n].
inline void tn(const double* a, std::size_t i, std::size_t m, const double* b, double* c_row,
               std::size_t n, std::size_t k, bool accumulate) {
    double* out = accumulate ? scratch(n).data() : c_row;
    if (!accumulate) {
        std::fill(c_row, c_row + n, 0.0);
    }
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = a[kk * m + i];
        const double* b_row = b + kk * n;
        for (std::size_t j = 0; j < n; ++j) {
            out[j] += av * b_row[j];
        }
    }
    if (accumulate) {
        for (std::size_t j = 0; j < n; ++j) {
            c_row[j] += out[j];
        }
    }
}

inline void softmax(const double* x, double* y, std::size_t width) {
    double max = x[0];
    for (std::size_t j = 1; j < width; ++j) {
        max = std::max(max, x[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
        y[j] = std::exp(x[j] - max);
        sum += y[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < width; ++j) {
        y[j] *= inv;
    }
}

inline void layer_norm(const double* x, double* y, std::size_t width, double eps, double& mean,
                       double& rstd) {
    double sum = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
        sum += x[j];
    }
    mean = sum / static_cast<double>(width);
    double var = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
        const double d = x[j] - mean;
        var += d * d;
    }
    var /= static_cast<double>(width);
    rstd = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < width; ++j) {
        y[j] = (x[j] - mean) * rstd;
    }
}

inline double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x * (std::numbers::sqrt2 / 2.0)));
}

}  // namespace puzzletune::kernels::rows
