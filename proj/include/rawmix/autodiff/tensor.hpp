#pragma once

// Dense 64-bit tensors and a reverse-mode tape. Ops (see ops.hpp) append a
// backward closure to the tape whenever one of their inputs requires a
// gradient; Tape::backward replays the closures in reverse recording order.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rawmix::ad {

using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const noexcept { return static_cast<bool>(d_); }
    const Shape& shape() const { return d_->shape; }
    int rank() const { return static_cast<int>(d_->shape.size()); }
    int dim(int i) const { return d_->shape.at(i < 0 ? i + rank() : i); }
    std::size_t numel() const { return d_->value.size(); }

    // Handle semantics: a const Tensor still refers to mutable storage.
    std::span<double> value() const { return d_->value; }
    double item() const;

    bool requires_grad() const noexcept { return d_ && d_->requires_grad; }
    void set_requires_grad(bool on);
    /// Empty span when the tensor does not require a gradient.
    std::span<double> grad() const { return d_->grad; }
    void zero_grad();

    bool is(const Tensor& other) const noexcept { return d_ == other.d_; }

private:
    struct Data {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Data> d_;
};

class Tape {
public:
    Tape() = default;
    explicit Tape(bool recording) : recording_(recording) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const noexcept { return recording_; }
    /// True when an op with these inputs must record a backward rule.
    bool needs_grad(std::initializer_list<const Tensor*> inputs) const;

    void record(Tensor output, std::function<void()> backward);

    /// Seeds d(loss)/d(loss) = 1 and propagates. Intermediate gradients are
    /// reset first; leaf gradients accumulate until zeroed by the caller.
    /// Contract error when `loss` is not a scalar.
    void backward(const Tensor& loss);

    void clear();
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor output;
        std::function<void()> backward;
    };
    bool recording_ = true;
    std::vector<Node> nodes_;
};

} // namespace rawmix::ad
