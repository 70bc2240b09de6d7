// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "degradation.hpp"
#include "scene.hpp"
#include "sdm.hpp"

namespace uwgs {

struct Checkpoint {
    GaussianCloud cloud;
    SdmParams sdm;
    std::vector<WaterParams> water_history; // per training frame, in t order
    SceneBounds bounds;
    int step = 0;

    WaterParams average_water() const;
};

// Writes `<path>` as a binary little-endian PLY with 3DGS-style vertex
// attributes plus intrinsic color logits, and `<path>.sdm` as a tagged
// little-endian f32 sidecar holding SDM weights and per-frame water
// parameters. Round-trips are bit-exact for every learnable parameter.
void save_checkpoint(const std::string& ply_path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& ply_path);

} // namespace uwgs
