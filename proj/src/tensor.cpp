#include "puzzletune/tensor.hpp"

#include <cstring>
#include <numeric>

#include "puzzletune/error.hpp"

namespace puzzletune {

std::size_t element_count(const Shape& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            out += ",";
        }
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

std::span<double> detail::TensorImpl::grad_buffer() {
    if (grad.empty()) {
        grad.assign(data.size(), 0.0);
    }
    return grad;
}

Tensor::Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
    if (element_count(shape) != data.size()) {
        fail(ErrorCode::ShapeMismatch, "shape " + to_string(shape) + " does not match " +
                                           std::to_string(data.size()) + " values");
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape) {
    const std::size_t n = element_count(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
    const std::size_t n = element_count(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) {
    return Tensor(Shape{}, std::vector<double>{value});
}

double Tensor::item() const {
    if (numel() != 1) {
        fail(ErrorCode::NotScalar, "item() on tensor of shape " + to_string(shape()));
    }
    return impl_->data[0];
}

std::vector<double> Tensor::grad() const {
    if (impl_->grad.empty()) {
        return std::vector<double>(impl_->data.size(), 0.0);
    }
    return impl_->grad;
}

Tensor Tensor::clone() const {
    return Tensor(impl_->shape, impl_->data);
}

bool Tensor::bit_equal(const Tensor& other) const {
    return shape() == other.shape() &&
           std::memcmp(impl_->data.data(), other.impl_->data.data(), numel() * sizeof(double)) == 0;
}

std::string_view primitive_name(Primitive op) noexcept {
    switch (op) {
        case Primitive::matmul: return "matmul";
        case Primitive::add: return "add";
        case Primitive::scale: return "scale";
        case Primitive::reshape: return "reshape";
        case Primitive::transpose: return "transpose";
        case Primitive::concat: return "concat";
        case Primitive::index_select: return "index_select";
        case Primitive::index_assign: return "index_assign";
        case Primitive::layer_norm: return "layer_norm";
        case Primitive::softmax: return "softmax";
        case Primitive::gelu: return "gelu";
        case Primitive::mean: return "mean";
        case Primitive::mse: return "mse";
        case Primitive::bias_add: return "bias_add";
        case Primitive::custom: return "custom";
    }
    return "unknown";
}

Tape& Tape::current() {
    static thread_local Tape tape;
    return tape;
}

bool Tape::record(Primitive op, const std::vector<Tensor>& inputs, Tensor& output, Backward backward) {
    if (!enabled_) {
        return false;
    }
    bool any = false;
    for (const auto& in : inputs) {
        any = any || in.requires_grad();
    }
    if (!any) {
        return false;
    }
    Node node{op, {}, output.impl_, std::move(backward)};
    node.inputs.reserve(inputs.size());
    for (const auto& in : inputs) {
        node.inputs.push_back(in.impl_);
    }
    output.impl_->requires_grad = true;
    output.impl_->tape_generation = generation_;
    output.impl_->tape_node = nodes_.size();
    nodes_.push_back(std::move(node));
    return true;
}

void Tape::clear() {
    nodes_.clear();
    ++generation_;
}

NoGradGuard::NoGradGuard() : previous_(Tape::current().enabled_) {
    Tape::current().enabled_ = false;
}

NoGradGuard::~NoGradGuard() {
    Tape::current().enabled_ = previous_;
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        fail(ErrorCode::NotScalar, "backward() needs a scalar loss, got " + to_string(loss.shape()));
    }
    Tape& tape = Tape::current();
    const auto& impl = loss.impl();
    if (impl->tape_generation != tape.generation_ || impl->tape_node >= tape.nodes_.size() ||
        tape.nodes_[impl->tape_node].output != impl) {
        fail(ErrorCode::DisconnectedGraph, "loss was not produced on the current tape");
    }
    impl->grad_buffer()[0] += 1.0;
    for (std::size_t i = impl->tape_node + 1; i-- > 0;) {
        auto& node = tape.nodes_[i];
        if (node.output->grad.empty()) {
            continue;
        }
        node.backward(node.output->grad);
    }
    tape.clear();
}

}  // namespace puzzletune
