// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "fairlora/optim.hpp"

#include <cmath>
#include <numbers>

#include "fairlora/errors.hpp"

namespace fairlora {

void adamw_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamWState& state,
                const AdamWConfig& cfg, double lr) {
    if (params.size() != grads.size()) {
        throw ShapeError("adamw_step: " + std::to_string(params.size()) + " params but " +
                         std::to_string(grads.size()) + " gradients");
    }
    if (state.m.empty()) {
        for (const Tensor* p : params) {
            state.m.emplace_back(p->shape());
            state.v.emplace_back(p->shape());
        }
    }
    if (state.m.size() != params.size()) {
        throw ShapeError("adamw_step: optimizer state tracks a different parameter list");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    const double decay = 1.0 - lr * cfg.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        if (p.shape() != g.shape() || state.m[i].shape() != p.shape()) {
            throw ShapeError("adamw_step: shape mismatch for parameter " + std::to_string(i));
        }
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            p[j] = p[j] * decay - lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr) {
    if (total_steps == 0) {
        return base_lr;
    }
    if (step > total_steps) {
        throw DomainError("cosine_lr: step " + std::to_string(step) + " beyond total " + std::to_string(total_steps));
    }
    const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
    return base_lr * (1.0 + std::cos(std::numbers::pi * frac)) / 2.0;
}

} // namespace fairlora
