#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "common/error.hpp"

namespace masklab::numeric {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
    Shape shape;
    std::vector<float> data;
    bool requires_grad = false;
    std::vector<float> grad;  // empty until backward reaches this node
};

// Dense row-major f32 tensor. Value-semantic handle: copies share storage,
// which is what the tape needs; use clone() for an independent buffer.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<float> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }
    int dim(int axis) const { return impl_->shape[static_cast<std::size_t>(axis)]; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }

    const std::vector<float>& data() const { return impl_->data; }
    std::vector<float>& raw_data() { return impl_->data; }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v) { impl_->requires_grad = v; }
    bool has_grad() const { return !impl_->grad.empty(); }
    const std::vector<float>& grad() const;
    void zero_grad() { impl_->grad.clear(); }

    float item() const;
    float at(std::initializer_list<int> idx) const;

    Tensor clone() const;

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Records one backward closure per op, in execution order. Reverse replay
// visits every node after all of its consumers. Construction installs the
// tape as the active one for the current thread (one tape per thread).
class GradTape {
public:
    GradTape();
    ~GradTape();
    GradTape(const GradTape&) = delete;
    GradTape& operator=(const GradTape&) = delete;

    static GradTape* active();

    void record(const Tensor& out, std::function<void()> backward);
    void backward(const Tensor& loss);
    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        std::shared_ptr<TensorImpl> out;
        std::function<void()> fn;
    };
    std::vector<Node> nodes_;
    GradTape* prev_ = nullptr;
};

// Ensures t.grad is allocated (zero-filled) and returns it.
std::vector<float>& ensure_grad(TensorImpl& t);

// Named trainable tensors; iteration is lexicographic by name so optimizer
// updates and checkpoints are order-stable.
class ParamStore {
public:
    void add(const std::string& name, Tensor t);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) > 0; }

    std::size_t size() const { return params_.size(); }
    std::int64_t total_elements() const;
    void zero_grads();

    std::map<std::string, Tensor>::iterator begin() { return params_.begin(); }
    std::map<std::string, Tensor>::iterator end() { return params_.end(); }
    std::map<std::string, Tensor>::const_iterator begin() const { return params_.begin(); }
    std::map<std::string, Tensor>::const_iterator end() const { return params_.end(); }

private:
    std::map<std::string, Tensor> params_;
};

}  // namespace masklab::numeric
