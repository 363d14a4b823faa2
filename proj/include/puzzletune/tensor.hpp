#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace puzzletune {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape) noexcept;
std::string to_string(const Shape& shape);

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    // Empty until the first gradient contribution arrives.
    std::vector<double> grad;
    bool requires_grad = false;
    std::uint64_t tape_generation = 0;
    std::size_t tape_node = static_cast<std::size_t>(-1);

    std::span<double> grad_buffer();
};

}  // namespace detail

// Dense row-major float64 array. Copies share storage; use clone() for a
// deep copy. Values are immutable once a tensor has been handed to a
// primitive, apart from leaf parameters updated between tapes.
class Tensor {
public:
    Tensor();
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);

    const Shape& shape() const noexcept { return impl_->shape; }
    std::size_t rank() const noexcept { return impl_->shape.size(); }
    std::size_t numel() const noexcept { return impl_->data.size(); }
    std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }

    std::span<const double> data() const noexcept { return impl_->data; }
    std::span<double> mutable_data() noexcept { return impl_->data; }
    double item() const;

    bool requires_grad() const noexcept { return impl_->requires_grad; }
    void set_requires_grad(bool flag) noexcept { impl_->requires_grad = flag; }
    bool has_grad() const noexcept { return !impl_->grad.empty(); }
    // Zero-filled view when no gradient has been accumulated yet.
    std::vector<double> grad() const;
    void zero_grad() noexcept { impl_->grad.clear(); }

    // Same values, no gradient tracking, separate storage.
    Tensor clone() const;
    Tensor detach() const { return clone(); }

    bool same_storage(const Tensor& other) const noexcept { return impl_ == other.impl_; }
    bool bit_equal(const Tensor& other) const;

    const std::shared_ptr<detail::TensorImpl>& impl() const noexcept { return impl_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl> impl_;

    friend class Tape;
};

enum class Primitive {
    matmul,
    add,
    scale,
    reshape,
    transpose,
    concat,
    index_select,
    index_assign,
    layer_norm,
    softmax,
    gelu,
    mean,
    mse,
    bias_add,
    custom,
};

std::string_view primitive_name(Primitive op) noexcept;

// Records primitive applications for reverse-mode differentiation. One tape
// per thread; backward() replays it in reverse and then clears it.
class Tape {
public:
    using Backward = std::function<void(std::span<const double> grad_out)>;

    struct Node {
        Primitive op;
        std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
        std::shared_ptr<detail::TensorImpl> output;
        Backward backward;
    };

    static Tape& current();

    bool recording() const noexcept { return enabled_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    const Node& node(std::size_t index) const { return nodes_.at(index); }
    std::uint64_t generation() const noexcept { return generation_; }

    // Marks `output` as produced by `op` when any input requires a gradient
    // and recording is enabled. Returns whether a node was recorded.
    bool record(Primitive op, const std::vector<Tensor>& inputs, Tensor& output, Backward backward);

    void clear();

private:
    friend class NoGradGuard;
    friend void backward(const Tensor& loss);

    std::vector<Node> nodes_;
    std::uint64_t generation_ = 1;
    bool enabled_ = true;
};

// Disables recording on the current thread's tape for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

// Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable from
// `loss`, then consumes the tape.
void backward(const Tensor& loss);

}  // namespace puzzletune
