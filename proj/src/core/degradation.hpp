// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "expr.hpp"
#include "scene.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace uwgs {

// Per-frame water optics triple; shared across all Gaussian pairs at time t.
struct WaterParams {
    Vec3 ambient{0.1f, 0.55f, 0.78f}; // A, in (0,1)
    Vec3 attenuation{3.3f, 2.9f, 2.5f}; // beta, > 0, per scene unit
    Vec3 backscatter{2.0f, 1.88f, 1.8f}; // gamma, > 0, per scene unit

    bool valid() const {
        for (int k = 0; k < 3; ++k) {
            if (!(ambient[k] > 0 && ambient[k] < 1)) return false;
            if (!(attenuation[k] > 0) || !(backscatter[k] > 0)) return false;
            if (!std::isfinite(ambient[k]) || !std::isfinite(attenuation[k]) ||
                !std::isfinite(backscatter[k]))
                return false;
        }
        return true;
    }
};

// Color degradation: c_out = c * exp(-beta r) + A (1 - exp(-gamma r)) + eps,
// per channel. The output is deliberately not clamped. Written as a template
// so the same expression serves plain evaluation and tape recording.
template <class S>
inline S degrade_channel(S intrinsic, S beta, S gamma, S ambient, S r, S eps) {
    return intrinsic * exp(-beta * r) + ambient * (1.0f - exp(-gamma * r)) + eps;
}

inline Vec3 degrade_color(const Vec3& intrinsic, const WaterParams& w, float r, const Vec3& eps) {
    Vec3 out;
    for (int k = 0; k < 3; ++k)
        out[k] = degrade_channel(intrinsic[k], w.attenuation[k], w.backscatter[k], w.ambient[k], r,
                                 eps[k]);
    return out;
}

// Tape form over [3] tensors (r is [1], broadcast). `eps` may be kNone.
Tape::Id degrade_color_tape(Tape& t, Tape::Id intrinsic, Tape::Id ambient, Tape::Id attenuation,
                            Tape::Id backscatter, Tape::Id r, Tape::Id eps);

// Image-space underwater formation: per pixel I * exp(-beta z) + A (1 - exp(-gamma z)).
// No clamping here; datasets clamp at the final write.
HostTensor apply_water_image(const HostTensor& clean, const HostTensor& depth, const WaterParams& w);

// Same formation recorded on a tape; `ambient/attenuation/backscatter` are [3]
// nodes, clean and depth enter as constants. Returns the degraded [3,H,W] node.
Tape::Id apply_water_image_tape(Tape& t, const HostTensor& clean, const HostTensor& depth,
                                Tape::Id ambient, Tape::Id attenuation, Tape::Id backscatter);

// Procedural time-varying caustic field. `octaves` layers of ridge-transformed
// value noise, advected by `velocity` scene units per frame, averaged and
// kept in [0,1].
struct CausticConfig {
    std::string pattern_id = "A";
    float base_frequency = 3.0f;           // cycles per scene unit
    std::array<float, 2> velocity{0.07f, 0.035f}; // scene units per frame
    int octaves = 3;
    float amplitude = 0.4f; // kappa
    uint64_t seed = 1;
};

CausticConfig caustic_preset(const std::string& pattern_id);

float caustic_value(const CausticConfig& cfg, float wx, float wy, int t);

// Back-projects each pixel through `depth` (camera-space z), samples the
// caustic field at the world xy position and modulates: clean * (1 + kappa*(2C-1)).
HostTensor modulate_caustics(const HostTensor& clean, const HostTensor& depth,
                             const CameraFrame& cam, const CausticConfig& cfg, int t);

} // namespace uwgs
