// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "checkpoint.hpp"
#include "datasets.hpp"
#include "losses.hpp"
#include "optim.hpp"
#include "sdm.hpp"

namespace uwgs {

struct TrainConfig {
    StageConfig stages{300, 300, 300};
    LossWeights weights;
    SdmConfig sdm;
    uint64_t seed = 1;
    int checkpoint_interval = 0; // 0 = final only
    int max_gaussians = 100000;
    Vec3 background{0, 0, 0};

    // Learning-rate schedules; total_steps fields are filled from the stages.
    float lr_sdm_start = 1e-3f, lr_sdm_end = 1.5e-4f;     // decoder, WPE, omega
    float lr_ibf_start = 2e-3f, lr_ibf_end = 2e-4f;
    int ibf_warmup = -1; // -1: scaled from 1024/30000 of the total step budget
    float lr_hash_start = 1e-2f, lr_hash_end = 1e-4f;

    // Gaussian-attribute rates (gsplat-style defaults; position is scaled by
    // the scene extent and decays exponentially).
    float lr_position_start = 1.6e-4f, lr_position_end = 1.6e-6f;
    float lr_color = 2.5e-3f;
    float lr_opacity = 5e-2f;
    float lr_scale = 5e-3f;
    float lr_rotation = 1e-3f;

    // Ablation toggles.
    bool no_sd = false;      // identity water
    bool no_td = false;      // epsilon = 0
    bool no_dgg = false;     // drop the depth-guided geometry loss
    bool no_eps_reg = false; // drop the transient regularizer
    bool no_ms = false;      // joint-only optimization (no staging)

    int threads = 1;
};

TrainConfig parse_train_config(const std::string& json_text);
std::string train_config_to_json(const TrainConfig& cfg);

struct TrainResult {
    Checkpoint checkpoint;
    std::string checkpoint_path;
    std::string log_path;
    float final_loss = 0;
};

// Full multi-stage optimization over the dataset's train split. Writes
// checkpoint(s), a CSV loss/gradient log, and the resolved config into
// out_dir. Throws NumericError with a frame/step diagnostic on NaN loss.
TrainResult train(const Dataset& dataset, const TrainConfig& cfg, const std::string& out_dir);

} // namespace uwgs
