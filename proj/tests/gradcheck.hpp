#pragma once

// Central finite-difference gradient checks against the tape.

#include "rawmix/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace gradcheck {

using rawmix::ad::Tape;
using rawmix::ad::Tensor;

/// Relative error with a small absolute floor so that gradients that are
/// zero up to rounding do not divide by ~0.
inline double rel_error(double analytic, double numeric, double floor = 1e-8)
{
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct Result {
    double max_rel = 0;
    std::size_t checked = 0;
    std::size_t retried = 0; ///< coordinates that needed a smaller step
};

using LossFn = std::function<Tensor(Tape&)>;

/// Checks coordinates `coords` of `param` (all when empty). The loss is
/// rebuilt from scratch for every evaluation. When the h = 1e-3 estimate
/// misses the tolerance and `retry_steps` is non-empty, the coordinate is
/// re-estimated with those steps (piecewise-smooth models: a SELU or
/// max-pool kink inside [x - h, x + h] biases the wide stencil).
inline Result check_param(const LossFn& loss_fn, Tensor param, std::vector<std::size_t> coords,
                          double h = 1e-3, double tol = 1e-4, std::vector<double> retry_steps = {})
{
    param.zero_grad();
    {
        Tape tape;
        Tensor loss = loss_fn(tape);
        tape.backward(loss);
    }
    const std::vector<double> analytic(param.grad().begin(), param.grad().end());
    if (coords.empty())
        for (std::size_t i = 0; i < param.numel(); ++i)
            coords.push_back(i);

    auto numeric = [&](std::size_t i, double step) {
        const double v = param.value()[i];
        param.value()[i] = v + step;
        Tape t1(false);
        const double up = loss_fn(t1).item();
        param.value()[i] = v - step;
        Tape t2(false);
        const double down = loss_fn(t2).item();
        param.value()[i] = v;
        return (up - down) / (2 * step);
    };

    Result r;
    for (std::size_t i : coords) {
        double err = rel_error(analytic[i], numeric(i, h));
        if (err > tol && !retry_steps.empty()) {
            ++r.retried;
            for (double s : retry_steps)
                err = std::min(err, rel_error(analytic[i], numeric(i, s)));
        }
        r.max_rel = std::max(r.max_rel, err);
        ++r.checked;
    }
    param.zero_grad();
    return r;
}

/// Scalar reduction sum(out * W) with fixed random weights W, so every
/// output element contributes a distinct cotangent.
inline Tensor weighted_sum(Tape& tape, const Tensor& out, std::uint64_t seed)
{
    if (out.numel() == 1)
        return out;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> w(out.numel());
    for (double& v : w)
        v = u(rng);
    return rawmix::ad::sum(tape, rawmix::ad::mul(tape, out, Tensor::from(out.shape(), std::move(w))));
}

} // namespace gradcheck
