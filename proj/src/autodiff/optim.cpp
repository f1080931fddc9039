#include "rawmix/autodiff/optim.hpp"

#include "rawmix/error.hpp"

#include <cmath>

namespace rawmix::ad {

void adamw_step(std::span<double> param, std::span<const double> grad, std::span<double> m,
                std::span<double> v, const AdamWConfig& cfg, long t)
{
    if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size())
        fail(ErrorKind::structure, "adamw_step: parameter, gradient and moment sizes differ");
    if (t < 1)
        fail(ErrorKind::contract, "adamw_step: step counter starts at 1");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    const double decay = 1.0 - cfg.lr * cfg.weight_decay;
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] = param[i] * decay - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg)
{
    for (const Tensor& p : params_) {
        if (!p.requires_grad())
            fail(ErrorKind::contract, "AdamW: parameter does not require a gradient");
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void AdamW::step()
{
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i)
        adamw_step(params_[i].value(), params_[i].grad(), m_[i], v_[i], cfg_, t_);
}

void AdamW::zero_grad()
{
    for (Tensor& p : params_)
        p.zero_grad();
}

} // namespace rawmix::ad
