// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fairlora/tensor.hpp"

namespace fairlora {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 5e-4;
};

struct AdamWState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t step = 0;
};

/// One AdamW update with bias-corrected moments. Weight decay is decoupled:
/// params are scaled by (1 - lr * weight_decay) before the moment step.
/// State is lazily sized to the parameter list on the first call.
void adamw_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamWState& state,
                const AdamWConfig& cfg, double lr);

/// base_lr * (1 + cos(pi * step / total_steps)) / 2; returns base_lr when total_steps is 0.
double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr);

} // namespace fairlora
