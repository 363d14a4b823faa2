#include "puzzletune/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "puzzletune/error.hpp"
#include "puzzletune/kernels.hpp"

namespace puzzletune::ops {
namespace {

using ImplPtr = std::shared_ptr<detail::TensorImpl>;

bool tracking(std::initializer_list<const Tensor*> inputs) {
    if (!Tape::current().recording()) {
        return false;
    }
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

void check_finite(const Tensor& out, Primitive op) {
    for (double v : out.data()) {
        if (!std::isfinite(v)) {
            fail(ErrorCode::NonFinite, std::string(primitive_name(op)) + " produced a non-finite value");
        }
    }
}

[[noreturn]] void shape_error(Primitive op, const std::string& detail) {
    fail(ErrorCode::ShapeMismatch, std::string(primitive_name(op)) + ": " + detail);
}

// View of a tensor as [outer, axis, inner] around one axis.
struct AxisSplit {
    std::size_t outer = 1;
    std::size_t extent = 1;
    std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) {
        s.outer *= shape[i];
    }
    s.extent = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) {
        s.inner *= shape[i];
    }
    return s;
}

void check_axis(Primitive op, const Tensor& x, std::size_t axis) {
    if (axis >= x.rank()) {
        shape_error(op, "axis " + std::to_string(axis) + " out of range for " + to_string(x.shape()));
    }
}

Tensor make_output(Shape shape) { return Tensor::zeros(std::move(shape)); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    constexpr auto op = Primitive::matmul;
    if (a.rank() < 2 || (b.rank() != 2 && b.rank() != 3)) {
        shape_error(op, to_string(a.shape()) + " x " + to_string(b.shape()));
    }
    kernels::Batch batch;
    std::size_t m = 0;
    std::size_t k = 0;
    std::size_t n = 0;
    Shape out_shape;
    if (b.rank() == 2) {
        k = b.dim(0);
        n = b.dim(1);
        if (a.shape().back() != k) {
            shape_error(op, to_string(a.shape()) + " x " + to_string(b.shape()));
        }
        m = element_count(Shape(a.shape().begin(), a.shape().end() - 1));
        out_shape = a.shape();
        out_shape.back() = n;
    } else {
        if (a.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
            shape_error(op, to_string(a.shape()) + " x " + to_string(b.shape()));
        }
        batch.count = a.dim(0);
        m = a.dim(1);
        k = a.dim(2);
        n = b.dim(2);
        batch.stride_a = m * k;
        batch.stride_b = k * n;
        batch.stride_c = m * n;
        out_shape = {batch.count, m, n};
    }
    Tensor out = make_output(out_shape);
    kernels::gemm_nn(batch, m, n, k, a.data(), b.data(), out.mutable_data(), false);
    check_finite(out, op);
    if (tracking({&a, &b})) {
        ImplPtr ai = a.impl();
        ImplPtr bi = b.impl();
        Tape::current().record(op, {a, b}, out, [ai, bi, batch, m, n, k](std::span<const double> g) {
            if (ai->requires_grad) {
                kernels::Batch bt{batch.count, batch.stride_c, batch.stride_b, batch.stride_a};
                kernels::gemm_nt(bt, m, k, n, g, bi->data, ai->grad_buffer(), true);
            }
            if (bi->requires_grad) {
                if (batch.count == 1 && batch.stride_a == 0) {
                    // Shared right operand: reduce over every row of A.
                    kernels::gemm_tn(kernels::Batch{}, k, n, m, ai->data, g, bi->grad_buffer(), true);
                } else {
                    kernels::Batch bt{batch.count, batch.stride_a, batch.stride_c, batch.stride_b};
                    kernels::gemm_tn(bt, k, n, m, ai->data, g, bi->grad_buffer(), true);
                }
            }
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    constexpr auto op = Primitive::add;
    const bool a_scalar = a.rank() == 0;
    const bool b_scalar = b.rank() == 0;
    if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
        shape_error(op, to_string(a.shape()) + " + " + to_string(b.shape()));
    }
    const Tensor& big = (a_scalar && !b_scalar) ? b : a;
    Tensor out = make_output(big.shape());
    auto o = out.mutable_data();
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = ad[a_scalar ? 0 : i] + bd[b_scalar ? 0 : i];
    }
    check_finite(out, op);
    if (tracking({&a, &b})) {
        ImplPtr ai = a.impl();
        ImplPtr bi = b.impl();
        Tape::current().record(op, {a, b}, out, [ai, bi, a_scalar, b_scalar](std::span<const double> g) {
            for (auto [impl, is_scalar] : {std::pair{ai, a_scalar}, std::pair{bi, b_scalar}}) {
                if (!impl->requires_grad) {
                    continue;
                }
                auto dst = impl->grad_buffer();
                if (is_scalar && g.size() != 1) {
                    double sum = 0.0;
                    for (double v : g) {
                        sum += v;
                    }
                    dst[0] += sum;
                } else {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        dst[i] += g[i];
                    }
                }
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& x, double factor) {
    constexpr auto op = Primitive::scale;
    Tensor out = make_output(x.shape());
    auto o = out.mutable_data();
    auto xd = x.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = xd[i] * factor;
    }
    check_finite(out, op);
    if (tracking({&x})) {
        ImplPtr xi = x.impl();
        Tape::current().record(op, {x}, out, [xi, factor](std::span<const double> g) {
            auto dst = xi->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                dst[i] += g[i] * factor;
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    constexpr auto op = Primitive::reshape;
    if (element_count(shape) != x.numel()) {
        shape_error(op, to_string(x.shape()) + " -> " + to_string(shape));
    }
    Tensor out(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
    if (tracking({&x})) {
        ImplPtr xi = x.impl();
        Tape::current().record(op, {x}, out, [xi](std::span<const double> g) {
            auto dst = xi->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                dst[i] += g[i];
            }
        });
    }
    return out;
}

namespace {

// For each output flat index, the flat index of the source element.
std::vector<std::size_t> permutation_map(const Shape& in_shape, const std::vector<std::size_t>& perm,
                                         Shape& out_shape) {
    const std::size_t rank = in_shape.size();
    std::vector<std::size_t> in_strides(rank, 1);
    for (std::size_t i = rank; i-- > 1;) {
        in_strides[i - 1] = in_strides[i] * in_shape[i];
    }
    out_shape.resize(rank);
    std::vector<std::size_t> strides(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        out_shape[i] = in_shape[perm[i]];
        strides[i] = in_strides[perm[i]];
    }
    const std::size_t total = element_count(in_shape);
    std::vector<std::size_t> map(total);
    std::vector<std::size_t> counter(rank, 0);
    std::size_t src = 0;
    for (std::size_t flat = 0; flat < total; ++flat) {
        map[flat] = src;
        for (std::size_t d = rank; d-- > 0;) {
            ++counter[d];
            src += strides[d];
            if (counter[d] < out_shape[d]) {
                break;
            }
            src -= strides[d] * counter[d];
            counter[d] = 0;
        }
    }
    return map;
}

}  // namespace

Tensor transpose(const Tensor& x, const std::vector<std::size_t>& perm) {
    constexpr auto op = Primitive::transpose;
    if (perm.size() != x.rank()) {
        shape_error(op, "permutation rank differs from " + to_string(x.shape()));
    }
    std::vector<bool> seen(perm.size(), false);
    for (auto p : perm) {
        if (p >= perm.size() || seen[p]) {
            shape_error(op, "invalid axis permutation");
        }
        seen[p] = true;
    }
    Shape out_shape;
    auto map = permutation_map(x.shape(), perm, out_shape);
    Tensor out = make_output(out_shape);
    auto o = out.mutable_data();
    auto xd = x.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = xd[map[i]];
    }
    if (tracking({&x})) {
        ImplPtr xi = x.impl();
        Tape::current().record(op, {x}, out, [xi, map = std::move(map)](std::span<const double> g) {
            auto dst = xi->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                dst[map[i]] += g[i];
            }
        });
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    constexpr auto op = Primitive::concat;
    if (parts.empty()) {
        shape_error(op, "no inputs");
    }
    check_axis(op, parts[0], axis);
    Shape out_shape = parts[0].shape();
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        if (p.rank() != out_shape.size()) {
            shape_error(op, "rank mismatch");
        }
        for (std::size_t d = 0; d < p.rank(); ++d) {
            if (d != axis && p.dim(d) != parts[0].dim(d)) {
                shape_error(op, to_string(p.shape()) + " vs " + to_string(parts[0].shape()));
            }
        }
        out_shape[axis] += p.dim(axis);
    }
    Tensor out = make_output(out_shape);
    const AxisSplit os = split_at(out_shape, axis);
    auto o = out.mutable_data();
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        offsets.push_back(offset);
        const std::size_t chunk = p.dim(axis) * os.inner;
        auto pd = p.data();
        for (std::size_t r = 0; r < os.outer; ++r) {
            std::copy_n(pd.begin() + static_cast<std::ptrdiff_t>(r * chunk), chunk,
                        o.begin() + static_cast<std::ptrdiff_t>(r * os.extent * os.inner + offset * os.inner));
        }
        offset += p.dim(axis);
    }
    bool any = false;
    for (const auto& p : parts) {
        any = any || p.requires_grad();
    }
    if (any && Tape::current().recording()) {
        std::vector<ImplPtr> impls;
        for (const auto& p : parts) {
            impls.push_back(p.impl());
        }
        Tape::current().record(op, parts, out, [impls, offsets, os, axis](std::span<const double> g) {
            for (std::size_t pi = 0; pi < impls.size(); ++pi) {
                const auto& impl = impls[pi];
                if (!impl->requires_grad) {
                    continue;
                }
                const std::size_t chunk = impl->shape[axis] * os.inner;
                auto dst = impl->grad_buffer();
                for (std::size_t r = 0; r < os.outer; ++r) {
                    const std::size_t src = r * os.extent * os.inner + offsets[pi] * os.inner;
                    for (std::size_t j = 0; j < chunk; ++j) {
                        dst[r * chunk + j] += g[src + j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor index_select(const Tensor& x, std::size_t axis, const std::vector<std::size_t>& indices) {
    constexpr auto op = Primitive::index_select;
    check_axis(op, x, axis);
    const AxisSplit s = split_at(x.shape(), axis);
    for (auto idx : indices) {
        if (idx >= s.extent) {
            shape_error(op, "index " + std::to_string(idx) + " out of range for axis extent " +
                                std::to_string(s.extent));
        }
    }
    Shape out_shape = x.shape();
    out_shape[axis] = indices.size();
    Tensor out = make_output(out_shape);
    auto o = out.mutable_data();
    auto xd = x.data();
    const std::size_t n = indices.size();
    for (std::size_t r = 0; r < s.outer; ++r) {
        for (std::size_t j = 0; j < n; ++j) {
            std::copy_n(xd.begin() + static_cast<std::ptrdiff_t>((r * s.extent + indices[j]) * s.inner), s.inner,
                        o.begin() + static_cast<std::ptrdiff_t>((r * n + j) * s.inner));
        }
    }
    if (tracking({&x})) {
        ImplPtr xi = x.impl();
        Tape::current().record(op, {x}, out, [xi, indices, s](std::span<const double> g) {
            auto dst = xi->grad_buffer();
            const std::size_t n = indices.size();
            for (std::size_t r = 0; r < s.outer; ++r) {
                for (std::size_t j = 0; j < n; ++j) {
                    const std::size_t from = (r * n + j) * s.inner;
                    const std::size_t to = (r * s.extent + indices[j]) * s.inner;
                    for (std::size_t e = 0; e < s.inner; ++e) {
                        dst[to + e] += g[from + e];
                    }
                }
            }
        });
    }
    return out;
}

Tensor index_assign(const Tensor& base, std::size_t axis, const std::vector<std::size_t>& indices,
                    const Tensor& values) {
    constexpr auto op = Primitive::index_assign;
    check_axis(op, base, axis);
    const AxisSplit s = split_at(base.shape(), axis);
    Shape expected = base.shape();
    expected[axis] = indices.size();
    if (values.shape() != expected) {
        shape_error(op, "values " + to_string(values.shape()) + " expected " + to_string(expected));
    }
    std::vector<bool> hit(s.extent, false);
    for (auto idx : indices) {
        if (idx >= s.extent || hit[idx]) {
            shape_error(op, "indices must be unique and within the axis extent");
        }
        hit[idx] = true;
    }
    Tensor out(base.shape(), std::vector<double>(base.data().begin(), base.data().end()));
    auto o = out.mutable_data();
    auto vd = values.data();
    const std::size_t n = indices.size();
    for (std::size_t r = 0; r < s.outer; ++r) {
        for (std::size_t j = 0; j < n; ++j) {
            std::copy_n(vd.begin() + static_cast<std::ptrdiff_t>((r * n + j) * s.inner), s.inner,
                        o.begin() + static_cast<std::ptrdiff_t>((r * s.extent + indices[j]) * s.inner));
        }
    }
    if (tracking({&base, &values})) {
        ImplPtr bi = base.impl();
        ImplPtr vi = values.impl();
        Tape::current().record(op, {base, values}, out, [bi, vi, indices, hit, s](std::span<const double> g) {
            const std::size_t n = indices.size();
            if (bi->requires_grad) {
                auto dst = bi->grad_buffer();
                for (std::size_t r = 0; r < s.outer; ++r) {
                    for (std::size_t a = 0; a < s.extent; ++a) {
                        if (hit[a]) {
                            continue;
                        }
                        const std::size_t off = (r * s.extent + a) * s.inner;
                        for (std::size_t e = 0; e < s.inner; ++e) {
                            dst[off + e] += g[off + e];
                        }
                    }
                }
            }
            if (vi->requires_grad) {
                auto dst = vi->grad_buffer();
                for (std::size_t r = 0; r < s.outer; ++r) {
                    for (std::size_t j = 0; j < n; ++j) {
                        const std::size_t to = (r * n + j) * s.inner;
                        const std::size_t from = (r * s.extent + indices[j]) * s.inner;
                        for (std::size_t e = 0; e < s.inner; ++e) {
                            dst[to + e] += g[from + e];
                        }
                    }
                }
            }
        });
    }
    return out;
}

namespace {

Tensor layer_norm_impl(const Tensor& x, const Tensor* gamma, const Tensor* beta) {
    constexpr auto op = Primitive::layer_norm;
    if (x.rank() == 0) {
        shape_error(op, "rank-0 input");
    }
    const std::size_t width = x.shape().back();
    const std::size_t rows = width == 0 ? 0 : x.numel() / width;
    if (gamma != nullptr && (gamma->shape() != Shape{width} || beta->shape() != Shape{width})) {
        shape_error(op, "affine parameters must have shape [" + std::to_string(width) + "]");
    }
    Tensor out = make_output(x.shape());
    std::vector<double> xhat(x.numel());
    std::vector<double> mean(rows);
    std::vector<double> rstd(rows);
    kernels::layer_norm_rows(rows, width, kLayerNormEps, x.data(), xhat, mean, rstd);
    auto o = out.mutable_data();
    if (gamma != nullptr) {
        auto gd = gamma->data();
        auto bd = beta->data();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < width; ++j) {
                o[r * width + j] = xhat[r * width + j] * gd[j] + bd[j];
            }
        }
    } else {
        std::copy(xhat.begin(), xhat.end(), o.begin());
    }
    check_finite(out, op);
    const bool track = gamma != nullptr ? tracking({&x, gamma, beta}) : tracking({&x});
    if (track) {
        ImplPtr xi = x.impl();
        ImplPtr gi = gamma != nullptr ? gamma->impl() : nullptr;
        ImplPtr bi = gamma != nullptr ? beta->impl() : nullptr;
        std::vector<Tensor> inputs{x};
        if (gamma != nullptr) {
            inputs.push_back(*gamma);
            inputs.push_back(*beta);
        }
        Tape::current().record(
            op, inputs, out,
            [xi, gi, bi, xhat = std::move(xhat), rstd = std::move(rstd), rows, width](std::span<const double> g) {
                std::vector<double> dxhat(width);
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* gr = g.data() + r * width;
                    const double* xr = xhat.data() + r * width;
                    if (gi && gi->requires_grad) {
                        auto dg = gi->grad_buffer();
                        for (std::size_t j = 0; j < width; ++j) {
                            dg[j] += gr[j] * xr[j];
                        }
                    }
                    if (bi && bi->requires_grad) {
                        auto db = bi->grad_buffer();
                        for (std::size_t j = 0; j < width; ++j) {
                            db[j] += gr[j];
                        }
                    }
                    if (!xi->requires_grad) {
                        continue;
                    }
                    double mean_d = 0.0;
                    double mean_dx = 0.0;
                    for (std::size_t j = 0; j < width; ++j) {
                        dxhat[j] = gi ? gr[j] * gi->data[j] : gr[j];
                        mean_d += dxhat[j];
                        mean_dx += dxhat[j] * xr[j];
                    }
                    mean_d /= static_cast<double>(width);
                    mean_dx /= static_cast<double>(width);
                    auto dx = xi->grad_buffer();
                    for (std::size_t j = 0; j < width; ++j) {
                        dx[r * width + j] += rstd[r] * (dxhat[j] - mean_d - xr[j] * mean_dx);
                    }
                }
            });
    }
    return out;
}

}  // namespace

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    return layer_norm_impl(x, &gamma, &beta);
}

Tensor layer_norm(const Tensor& x) { return layer_norm_impl(x, nullptr, nullptr); }

Tensor softmax(const Tensor& x, std::size_t axis) {
    constexpr auto op = Primitive::softmax;
    check_axis(op, x, axis);
    const AxisSplit s = split_at(x.shape(), axis);
    Tensor out = make_output(x.shape());
    auto o = out.mutable_data();
    auto xd = x.data();
    if (s.inner == 1) {
        kernels::softmax_rows(s.outer, s.extent, xd, o);
    } else {
        std::vector<double> row_in(s.extent);
        std::vector<double> row_out(s.extent);
        for (std::size_t r = 0; r < s.outer; ++r) {
            for (std::size_t c = 0; c < s.inner; ++c) {
                for (std::size_t a = 0; a < s.extent; ++a) {
                    row_in[a] = xd[(r * s.extent + a) * s.inner + c];
                }
                kernels::serial::softmax_rows(1, s.extent, row_in, row_out);
                for (std::size_t a = 0; a < s.extent; ++a) {
                    o[(r * s.extent + a) * s.inner + c] = row_out[a];
                }
            }
        }
    }
    check_finite(out, op);
    if (tracking({&x})) {
        ImplPtr xi = x.impl();
        ImplPtr yi = out.impl();
        Tape::current().record(op, {x}, out, [xi, yi, s](std::span<const double> g) {
            auto dst = xi->grad_buffer();
            const auto& y = yi->data;
            for (std::size_t r = 0; r < s.outer; ++r) {
                for (std::size_t c = 0; c < s.inner; ++c) {
                    double dot = 0.0;
                    for (std::size_t a = 0; a < s.extent; ++a) {
                        const std::size_t i = (r * s.extent + a) * s.inner + c;
                        dot += g[i] * y[i];
                    }
                    for (std::size_t a = 0; a < s.extent; ++a) {
                        const std::size_t i = (r * s.extent + a) * s.inner + c;
                        dst[i] += y[i] * (g[i] - dot);
                    }
                }
            }
        });
    }
    return out;
}

Tensor gelu(const Tensor& x) {
    constexpr auto op = Primitive::gelu;
    Tensor out = make_output(x.shape());
    kernels::gelu(x.data(), out.mutable_data());
    check_finite(out, op);
    if (tracking({&x})) {
        ImplPtr xi = x.impl();
        Tape::current().record(op, {x}, out, [xi](std::span<const double> g) {
            auto dst = xi->grad_buffer();
            const double inv_sqrt_2pi = std::numbers::inv_sqrtpi * (std::numbers::sqrt2 / 2.0);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double v = xi->data[i];
                const double cdf = 0.5 * (1.0 + std::erf(v * (std::numbers::sqrt2 / 2.0)));
                const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
                dst[i] += g[i] * (cdf + v * pdf);
            }
        });
    }
    return out;
}

Tensor mean(const Tensor& x) {
    constexpr auto op = Primitive::mean;
    if (x.numel() == 0) {
        shape_error(op, "mean of an empty tensor");
    }
    double sum = 0.0;
    for (double v : x.data()) {
        sum += v;
    }
    Tensor out = Tensor::scalar(sum / static_cast<double>(x.numel()));
    check_finite(out, op);
    if (tracking({&x})) {
        ImplPtr xi = x.impl();
        Tape::current().record(op, {x}, out, [xi](std::span<const double> g) {
            auto dst = xi->grad_buffer();
            const double share = g[0] / static_cast<double>(dst.size());
            for (auto& d : dst) {
                d += share;
            }
        });
    }
    return out;
}

Tensor mse(const Tensor& prediction, const Tensor& target) {
    constexpr auto op = Primitive::mse;
    if (prediction.shape() != target.shape()) {
        shape_error(op, to_string(prediction.shape()) + " vs " + to_string(target.shape()));
    }
    if (prediction.numel() == 0) {
        shape_error(op, "mse of empty tensors");
    }
    auto p = prediction.data();
    auto t = target.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        sum += d * d;
    }
    Tensor out = Tensor::scalar(sum / static_cast<double>(p.size()));
    check_finite(out, op);
    if (tracking({&prediction, &target})) {
        ImplPtr pi = prediction.impl();
        ImplPtr ti = target.impl();
        Tape::current().record(op, {prediction, target}, out, [pi, ti](std::span<const double> g) {
            const std::size_t n = pi->data.size();
            const double factor = 2.0 * g[0] / static_cast<double>(n);
            if (pi->requires_grad) {
                auto dst = pi->grad_buffer();
                for (std::size_t i = 0; i < n; ++i) {
                    dst[i] += factor * (pi->data[i] - ti->data[i]);
                }
            }
            if (ti->requires_grad) {
                auto dst = ti->grad_buffer();
                for (std::size_t i = 0; i < n; ++i) {
                    dst[i] -= factor * (pi->data[i] - ti->data[i]);
                }
            }
        });
    }
    return out;
}

Tensor bias_add(const Tensor& x, const Tensor& bias) {
    constexpr auto op = Primitive::bias_add;
    if (bias.rank() > x.rank() ||
        !std::equal(bias.shape().begin(), bias.shape().end(), x.shape().end() - static_cast<std::ptrdiff_t>(bias.rank()))) {
        shape_error(op, to_string(bias.shape()) + " is not a trailing shape of " + to_string(x.shape()));
    }
    const std::size_t width = bias.numel();
    Tensor out = make_output(x.shape());
    auto o = out.mutable_data();
    auto xd = x.data();
    auto bd = bias.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = xd[i] + bd[i % width];
    }
    check_finite(out, op);
    if (tracking({&x, &bias})) {
        ImplPtr xi = x.impl();
        ImplPtr bi = bias.impl();
        Tape::current().record(op, {x, bias}, out, [xi, bi, width](std::span<const double> g) {
            if (xi->requires_grad) {
                auto dst = xi->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    dst[i] += g[i];
                }
            }
            if (bi->requires_grad) {
                auto dst = bi->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    dst[i % width] += g[i];
                }
            }
        });
    }
    return out;
}

Tensor custom(const std::vector<Tensor>& inputs, Tensor output, CustomBackward backward) {
    check_finite(output, Primitive::custom);
    std::vector<ImplPtr> impls;
    for (const auto& in : inputs) {
        impls.push_back(in.impl());
    }
    Tape::current().record(Primitive::custom, inputs, output,
                           [impls, backward = std::move(backward)](std::span<const double> g) {
                               std::vector<std::span<double>> grads;
                               for (const auto& impl : impls) {
                                   grads.push_back(impl->requires_grad ? impl->grad_buffer()
                                                                       : std::span<double>{});
                               }
                               backward(g, grads);
                           });
    return output;
}

namespace {

const AttrValue& attr(const Attrs& attrs, const std::string& key) {
    auto it = attrs.find(key);
    if (it == attrs.end()) {
        fail(ErrorCode::ConfigError, "missing primitive attribute '" + key + "'");
    }
    return it->second;
}

std::int64_t attr_int(const Attrs& attrs, const std::string& key) {
    const auto& v = attr(attrs, key);
    if (const auto* i = std::get_if<std::int64_t>(&v)) {
        return *i;
    }
    fail(ErrorCode::ConfigError, "attribute '" + key + "' must be an integer");
}

double attr_double(const Attrs& attrs, const std::string& key) {
    const auto& v = attr(attrs, key);
    if (const auto* d = std::get_if<double>(&v)) {
        return *d;
    }
    if (const auto* i = std::get_if<std::int64_t>(&v)) {
        return static_cast<double>(*i);
    }
    fail(ErrorCode::ConfigError, "attribute '" + key + "' must be a number");
}

std::vector<std::size_t> attr_list(const Attrs& attrs, const std::string& key) {
    const auto& v = attr(attrs, key);
    const auto* list = std::get_if<std::vector<std::int64_t>>(&v);
    if (list == nullptr) {
        fail(ErrorCode::ConfigError, "attribute '" + key + "' must be an integer list");
    }
    std::vector<std::size_t> out;
    for (auto x : *list) {
        if (x < 0) {
            fail(ErrorCode::ConfigError, "attribute '" + key + "' must be non-negative");
        }
        out.push_back(static_cast<std::size_t>(x));
    }
    return out;
}

std::size_t attr_axis(const Attrs& attrs) {
    const auto axis = attr_int(attrs, "axis");
    if (axis < 0) {
        fail(ErrorCode::ShapeMismatch, "negative axis");
    }
    return static_cast<std::size_t>(axis);
}

void expect_inputs(std::string_view name, std::span<const Tensor> inputs, std::size_t n) {
    if (inputs.size() != n) {
        fail(ErrorCode::ShapeMismatch, std::string(name) + " expects " + std::to_string(n) + " inputs, got " +
                                           std::to_string(inputs.size()));
    }
}

}  // namespace

const std::vector<std::string_view>& primitive_names() {
    static const std::vector<std::string_view> names{
        "matmul", "add",        "scale",   "reshape", "transpose", "concat", "index_select",
        "index_assign", "layer_norm", "softmax", "gelu", "mean", "mse", "bias_add"};
    return names;
}

Tensor apply_primitive(std::string_view name, std::span<const Tensor> inputs, const Attrs& attrs) {
    if (name == "matmul") {
        expect_inputs(name, inputs, 2);
        return matmul(inputs[0], inputs[1]);
    }
    if (name == "add") {
        expect_inputs(name, inputs, 2);
        return add(inputs[0], inputs[1]);
    }
    if (name == "scale") {
        expect_inputs(name, inputs, 1);
        return scale(inputs[0], attr_double(attrs, "factor"));
    }
    if (name == "reshape") {
        expect_inputs(name, inputs, 1);
        return reshape(inputs[0], attr_list(attrs, "shape"));
    }
    if (name == "transpose") {
        expect_inputs(name, inputs, 1);
        return transpose(inputs[0], attr_list(attrs, "perm"));
    }
    if (name == "concat") {
        return concat(std::vector<Tensor>(inputs.begin(), inputs.end()), attr_axis(attrs));
    }
    if (name == "index_select") {
        expect_inputs(name, inputs, 1);
        return index_select(inputs[0], attr_axis(attrs), attr_list(attrs, "indices"));
    }
    if (name == "index_assign") {
        expect_inputs(name, inputs, 2);
        return index_assign(inputs[0], attr_axis(attrs), attr_list(attrs, "indices"), inputs[1]);
    }
    if (name == "layer_norm") {
        if (inputs.size() == 1) {
            return layer_norm(inputs[0]);
        }
        expect_inputs(name, inputs, 3);
        return layer_norm(inputs[0], inputs[1], inputs[2]);
    }
    if (name == "softmax") {
        expect_inputs(name, inputs, 1);
        return softmax(inputs[0], attr_axis(attrs));
    }
    if (name == "gelu") {
        expect_inputs(name, inputs, 1);
        return gelu(inputs[0]);
    }
    if (name == "mean") {
        expect_inputs(name, inputs, 1);
        return mean(inputs[0]);
    }
    if (name == "mse") {
        expect_inputs(name, inputs, 2);
        return mse(inputs[0], inputs[1]);
    }
    if (name == "bias_add") {
        expect_inputs(name, inputs, 2);
        return bias_add(inputs[0], inputs[1]);
    }
    fail(ErrorCode::UnknownPrimitive, "unknown primitive '" + std::string(name) + "'");
}

}  // namespace puzzletune::ops
