#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "puzzletune/tensor.hpp"

// Differentiable primitives. Every primitive validates shapes, rejects
// non-finite results and records a tape node when an input requires a
// gradient. There is no implicit broadcasting: `add` accepts a rank-0
// operand, and `bias_add` adds a tensor matching the trailing extents.
namespace puzzletune::ops {

inline constexpr double kLayerNormEps = 1e-6;

// [..., k] x [k, n] -> [..., n], or batched [N, m, k] x [N, k, n] -> [N, m, n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor reshape(const Tensor& x, Shape shape);
// Axis permutation: output axis i is input axis perm[i].
Tensor transpose(const Tensor& x, const std::vector<std::size_t>& perm);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor index_select(const Tensor& x, std::size_t axis, const std::vector<std::size_t>& indices);
// Copy of `base` whose slices at `indices` along `axis` are taken from `values`.
Tensor index_assign(const Tensor& base, std::size_t axis, const std::vector<std::size_t>& indices,
                    const Tensor& values);
// Normalizes over the last axis; gamma and beta have the last extent.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta);
Tensor layer_norm(const Tensor& x);
Tensor softmax(const Tensor& x, std::size_t axis);
// Exact erf form.
Tensor gelu(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mse(const Tensor& prediction, const Tensor& target);
// bias.shape() must equal the trailing extents of x.shape().
Tensor bias_add(const Tensor& x, const Tensor& bias);

// User-supplied primitive. `backward` receives the output gradient and one
// span per input (empty for inputs that do not require a gradient) into
// which it must accumulate.
using CustomBackward =
    std::function<void(std::span<const double> grad_out, std::vector<std::span<double>>& grad_in)>;
Tensor custom(const std::vector<Tensor>& inputs, Tensor output, CustomBackward backward);

using AttrValue = std::variant<std::int64_t, double, std::vector<std::int64_t>>;
using Attrs = std::map<std::string, AttrValue>;

// Name-based dispatch over the catalogue above. Attributes: scale{factor},
// reshape{shape}, transpose{perm}, concat{axis}, index_select{axis,indices},
// index_assign{axis,indices}, softmax{axis}.
Tensor apply_primitive(std::string_view name, std::span<const Tensor> inputs, const Attrs& attrs);

const std::vector<std::string_view>& primitive_names();

}  // namespace puzzletune::ops
