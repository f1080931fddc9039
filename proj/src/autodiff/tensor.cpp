#include "rawmix/autodiff/tensor.hpp"

#include "rawmix/error.hpp"

#include <algorithm>

namespace rawmix::ad {

std::string shape_str(const Shape& shape)
{
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i)
            s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::size_t shape_numel(const Shape& shape)
{
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0)
            fail(ErrorKind::structure, "negative dimension in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad)
{
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad)
{
    const std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad)
{
    if (shape_numel(shape) != values.size())
        fail(ErrorKind::structure, "shape " + shape_str(shape) + " does not hold " +
                                       std::to_string(values.size()) + " values");
    Tensor t;
    t.d_ = std::make_shared<Data>();
    t.d_->shape = std::move(shape);
    t.d_->value = std::move(values);
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad)
{
    return from({1}, {value}, requires_grad);
}

double Tensor::item() const
{
    if (numel() != 1)
        fail(ErrorKind::contract, "item() on tensor of shape " + shape_str(shape()));
    return d_->value[0];
}

void Tensor::set_requires_grad(bool on)
{
    d_->requires_grad = on;
    if (on)
        d_->grad.assign(d_->value.size(), 0.0);
    else
        d_->grad.clear();
}

void Tensor::zero_grad()
{
    std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
}

bool Tape::needs_grad(std::initializer_list<const Tensor*> inputs) const
{
    if (!recording_)
        return false;
    return std::any_of(inputs.begin(), inputs.end(),
                       [](const Tensor* t) { return t && t->defined() && t->requires_grad(); });
}

void Tape::record(Tensor output, std::function<void()> backward)
{
    nodes_.push_back({std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss)
{
    if (!loss.defined() || loss.numel() != 1)
        fail(ErrorKind::contract, "backward() needs a scalar loss, got shape " +
                                      (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    if (!loss.requires_grad())
        fail(ErrorKind::contract, "loss does not depend on any tensor that requires a gradient");
    for (Node& n : nodes_)
        n.output.zero_grad();
    Tensor seed = loss;
    seed.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
        it->backward();
}

void Tape::clear()
{
    nodes_.clear();
}

} // namespace rawmix::ad
