// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "common.hpp"

namespace uwgs {

struct AdamConfig {
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-15f;
};

// Per-tensor Adam state. `step` counts the updates actually applied to this
// tensor, so a branch frozen by the stage protocol keeps its state untouched.
struct AdamState {
    std::vector<float> m, v;
    int64_t step = 0;

    void ensure(size_t n) {
        if (m.size() != n) {
            m.assign(n, 0.0f);
            v.assign(n, 0.0f);
        }
    }
};

void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state, float lr,
               const AdamConfig& cfg = {});

// Linear warmup from 0 to lr_start, then exponential decay to lr_end.
struct Schedule {
    float lr_start = 1e-3f;
    float lr_end = 1.5e-4f;
    int total_steps = 900;
    int warmup_steps = 0;
};

float lr_at(const Schedule& s, int step);

struct StageConfig {
    int stage1 = 300;
    int stage2 = 300;
    int stage3 = 300;
    int total() const { return stage1 + stage2 + stage3; }
};

struct TrainableMask {
    bool sd = true;
    bool td = true;
    bool gaussians = true;
};

// Stage I: SD only (TD frozen). Stage II: interleaved, even offset -> SD,
// odd -> TD. Stage III: joint. Gaussians update in every stage.
TrainableMask trainable_mask(const StageConfig& cfg, int step);

} // namespace uwgs
