#include "numeric/tensor.hpp"

#include <cmath>
#include <sstream>

namespace masklab::numeric {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<float> data, bool requires_grad) {
    require(!shape.empty(), ErrorCode::InvalidArgument, "tensor shape must be non-empty");
    for (int d : shape)
        require(d > 0, ErrorCode::InvalidArgument, "tensor dimensions must be positive, got " + shape_str(shape));
    require(shape_numel(shape) == static_cast<std::int64_t>(data.size()), ErrorCode::InvalidArgument,
            "tensor data size does not match shape " + shape_str(shape));
    impl_ = std::make_shared<TensorImpl>();
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<float> data(static_cast<std::size_t>(shape_numel(shape)), 0.0f);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    std::vector<float> data(static_cast<std::size_t>(shape_numel(shape)), value);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(float value, bool requires_grad) {
    return Tensor({1}, {value}, requires_grad);
}

const std::vector<float>& Tensor::grad() const {
    require(has_grad(), ErrorCode::InvalidArgument, "tensor has no gradient");
    return impl_->grad;
}

float Tensor::item() const {
    require(numel() == 1, ErrorCode::InvalidArgument, "item() requires a scalar tensor");
    return impl_->data[0];
}

float Tensor::at(std::initializer_list<int> idx) const {
    require(static_cast<int>(idx.size()) == rank(), ErrorCode::InvalidArgument, "at(): index rank mismatch");
    std::int64_t flat = 0;
    std::size_t axis = 0;
    for (int i : idx) {
        int d = impl_->shape[axis];
        require(i >= 0 && i < d, ErrorCode::InvalidArgument, "at(): index out of range");
        flat = flat * d + i;
        ++axis;
    }
    return impl_->data[static_cast<std::size_t>(flat)];
}

Tensor Tensor::clone() const {
    return Tensor(impl_->shape, impl_->data, impl_->requires_grad);
}

std::vector<float>& ensure_grad(TensorImpl& t) {
    if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0f);
    return t.grad;
}

namespace {
thread_local GradTape* t_active_tape = nullptr;
}

GradTape::GradTape() {
    prev_ = t_active_tape;
    t_active_tape = this;
}

GradTape::~GradTape() { t_active_tape = prev_; }

GradTape* GradTape::active() { return t_active_tape; }

void GradTape::record(const Tensor& out, std::function<void()> backward) {
    nodes_.push_back(Node{out.impl(), std::move(backward)});
}

void GradTape::backward(const Tensor& loss) {
    require(loss.defined() && loss.numel() == 1, ErrorCode::InvalidArgument,
            "backward requires a scalar loss");
    require(loss.requires_grad(), ErrorCode::InvalidArgument,
            "backward on a tensor that does not require grad");
    ensure_grad(*loss.impl())[0] += 1.0f;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->out->grad.empty()) continue;  // not on the path from the loss
        it->fn();
    }
}

void ParamStore::add(const std::string& name, Tensor t) {
    require(t.defined(), ErrorCode::InvalidArgument, "param '" + name + "' is undefined");
    require(t.requires_grad(), ErrorCode::InvalidArgument, "param '" + name + "' must require grad");
    require(!contains(name), ErrorCode::InvalidArgument, "duplicate param name '" + name + "'");
    params_.emplace(name, std::move(t));
}

Tensor& ParamStore::get(const std::string& name) {
    auto it = params_.find(name);
    require(it != params_.end(), ErrorCode::InvalidArgument, "no param named '" + name + "'");
    return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    require(it != params_.end(), ErrorCode::InvalidArgument, "no param named '" + name + "'");
    return it->second;
}

std::int64_t ParamStore::total_elements() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
}

void ParamStore::zero_grads() {
    for (auto& [name, t] : params_) t.zero_grad();
}

}  // namespace masklab::numeric
