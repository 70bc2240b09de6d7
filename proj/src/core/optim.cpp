// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#include "optim.hpp"

#include <cmath>

namespace uwgs {

void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state, float lr,
               const AdamConfig& cfg) {
    require(params.size() == grads.size(), "adam_step: param/grad size mismatch");
    state.ensure(params.size());
    state.step += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        const float g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0f - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0f - cfg.beta2) * g * g;
        const float mhat = state.m[i] / static_cast<float>(bc1);
        const float vhat = state.v[i] / static_cast<float>(bc2);
        params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

float lr_at(const Schedule& s, int step) {
    require(s.lr_start > 0 && s.lr_end > 0, "lr_at: rates must be positive");
    require(s.warmup_steps < s.total_steps, "lr_at: warmup must be shorter than total");
    require(step >= 0 && step <= s.total_steps, "lr_at: step out of range");
    if (s.warmup_steps > 0 && step < s.warmup_steps)
        return s.lr_start * static_cast<float>(step) / static_cast<float>(s.warmup_steps);
    const double span = static_cast<double>(s.total_steps - s.warmup_steps);
    const double u = span > 0 ? static_cast<double>(step - s.warmup_steps) / span : 1.0;
    return static_cast<float>(s.lr_start *
                              std::pow(static_cast<double>(s.lr_end) / s.lr_start, u));
}

TrainableMask trainable_mask(const StageConfig& cfg, int step) {
    TrainableMask m;
    m.gaussians = true;
    if (step < cfg.stage1) {
        m.sd = true;
        m.td = false;
    } else if (step < cfg.stage1 + cfg.stage2) {
        const int offset = step - cfg.stage1;
        m.sd = (offset % 2 == 0);
        m.td = !m.sd;
    } else {
        m.sd = true;
        m.td = true;
    }
    return m;
}

} // namespace uwgs
