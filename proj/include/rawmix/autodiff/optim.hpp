#pragma once

#include "rawmix/autodiff/tensor.hpp"

#include <span>
#include <vector>

namespace rawmix::ad {

struct AdamWConfig {
    double lr = 2e-4;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One AdamW update of a flat parameter block at step t (1-based). Weight
/// decay is decoupled: theta *= 1 - lr * wd, then the bias-corrected
/// adaptive step is applied.
void adamw_step(std::span<double> param, std::span<const double> grad, std::span<double> m,
                std::span<double> v, const AdamWConfig& cfg, long t);

class AdamW {
public:
    AdamW(std::vector<Tensor> params, AdamWConfig cfg);

    void step();
    void zero_grad();
    long steps() const noexcept { return t_; }
    const AdamWConfig& config() const noexcept { return cfg_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamWConfig cfg_;
    long t_ = 0;
};

} // namespace rawmix::ad
