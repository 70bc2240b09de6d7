// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#include "degradation.hpp"

#include "rng.hpp"

namespace uwgs {

Tape::Id degrade_color_tape(Tape& t, Tape::Id intrinsic, Tape::Id ambient, Tape::Id attenuation,
                            Tape::Id backscatter, Tape::Id r, Tape::Id eps) {
    Tape::Id neg_r = t.mul_c(r, -1.0f);
    Tape::Id direct = t.mul(intrinsic, t.exp(t.mul(attenuation, neg_r)));
    Tape::Id veil = t.mul(ambient, t.rsub_c(t.exp(t.mul(backscatter, neg_r)), 1.0f));
    Tape::Id out = t.add(direct, veil);
    if (eps != Tape::kNone) out = t.add(out, eps);
    return out;
}

HostTensor apply_water_image(const HostTensor& clean, const HostTensor& depth, const WaterParams& w) {
    require(clean.shape.ndim == 3 && clean.channels() == 3, "apply_water_image: clean must be [3,H,W]");
    require(depth.shape.ndim == 3 && depth.channels() == 1 && depth.height() == clean.height() &&
                depth.width() == clean.width(),
            "apply_water_image: depth shape mismatch");
    HostTensor out(clean.shape);
    const int64_t hw = static_cast<int64_t>(clean.height()) * clean.width();
    for (int c = 0; c < 3; ++c) {
        const float beta = w.attenuation[c], gamma = w.backscatter[c], amb = w.ambient[c];
        const float* src = clean.data.data() + c * hw;
        const float* z = depth.data.data();
        float* dst = out.data.data() + c * hw;
        for (int64_t i = 0; i < hw; ++i)
            dst[i] = src[i] * std::exp(-beta * z[i]) + amb * (1.0f - std::exp(-gamma * z[i]));
    }
    return out;
}

Tape::Id apply_water_image_tape(Tape& t, const HostTensor& clean, const HostTensor& depth,
                                Tape::Id ambient, Tape::Id attenuation, Tape::Id backscatter) {
    require(clean.shape.ndim == 3 && clean.channels() == 3, "apply_water_image: clean must be [3,H,W]");
    const int H = clean.height(), W = clean.width();
    require(depth.height() == H && depth.width() == W, "apply_water_image: depth shape mismatch");
    const int64_t hw = static_cast<int64_t>(H) * W;
    Tape::Id z = t.constant(std::span<const float>(depth.data.data(), hw), Shape{static_cast<int32_t>(hw)});
    Tape::Id neg_z = t.mul_c(z, -1.0f);
    std::array<Tape::Id, 3> chans;
    for (int c = 0; c < 3; ++c) {
        Tape::Id src = t.constant(std::span<const float>(clean.data.data() + c * hw, hw),
                                  Shape{static_cast<int32_t>(hw)});
        Tape::Id beta_c = t.slice(attenuation, c, 1);
        Tape::Id gamma_c = t.slice(backscatter, c, 1);
        Tape::Id amb_c = t.slice(ambient, c, 1);
        Tape::Id direct = t.mul(src, t.exp(t.mul(neg_z, beta_c)));
        Tape::Id veil = t.mul(t.rsub_c(t.exp(t.mul(neg_z, gamma_c)), 1.0f), amb_c);
        chans[c] = t.add(direct, veil);
    }
    return t.concat(std::span<const Tape::Id>(chans.data(), 3), Shape{3, H, W});
}

CausticConfig caustic_preset(const std::string& pattern_id) {
    CausticConfig cfg;
    cfg.pattern_id = pattern_id;
    if (pattern_id == "A") {
        cfg.base_frequency = 3.0f;
        cfg.velocity = {0.07f, 0.035f};
        cfg.octaves = 3;
        cfg.seed = 101;
    } else if (pattern_id == "B") {
        cfg.base_frequency = 5.0f;
        cfg.velocity = {-0.05f, 0.09f};
        cfg.octaves = 2;
        cfg.seed = 202;
    } else if (pattern_id == "C") {
        cfg.base_frequency = 2.0f;
        cfg.velocity = {0.11f, -0.06f};
        cfg.octaves = 4;
        cfg.seed = 303;
    } else {
        throw InvalidArgument("unknown caustic pattern: " + pattern_id);
    }
    cfg.amplitude = 0.4f;
    return cfg;
}

namespace {

inline float smoothstep01(float x) { return x * x * (3.0f - 2.0f * x); }

// Value noise on an integer lattice, smooth-interpolated, in [0,1].
float value_noise(float x, float y, uint64_t seed) {
    const float fx = std::floor(x), fy = std::floor(y);
    const int64_t ix = static_cast<int64_t>(fx), iy = static_cast<int64_t>(fy);
    const float tx = smoothstep01(x - fx), ty = smoothstep01(y - fy);
    const float v00 = lattice_hash01(ix, iy, seed);
    const float v10 = lattice_hash01(ix + 1, iy, seed);
    const float v01 = lattice_hash01(ix, iy + 1, seed);
    const float v11 = lattice_hash01(ix + 1, iy + 1, seed);
    const float a = v00 * (1 - tx) + v10 * tx;
    const float b = v01 * (1 - tx) + v11 * tx;
    return a * (1 - ty) + b * ty;
}

} // namespace

float caustic_value(const CausticConfig& cfg, float wx, float wy, int t) {
    require(cfg.octaves >= 1, "caustic_value: octaves must be >= 1");
    float acc = 0;
    float freq = cfg.base_frequency;
    for (int o = 0; o < cfg.octaves; ++o) {
        // Alternate the advection direction slightly per octave so layers slide
        // against each other, as overlapping surface waves do.
        const float s = (o % 2 == 0) ? 1.0f : -0.7f;
        const float px = (wx - s * cfg.velocity[0] * t) * freq;
        const float py = (wy - s * cfg.velocity[1] * t) * freq;
        const float v = value_noise(px, py, cfg.seed + o * 7919);
        acc += 1.0f - std::fabs(2.0f * v - 1.0f); // ridge transform
        freq *= 2.0f;
    }
    // Ridge-transformed value noise averages to ~0.646; recenter to 0.5 and
    // rescale so the field stays inside [0,1] without clipping.
    const float raw = acc / static_cast<float>(cfg.octaves);
    return clampf((raw - 0.646f) * 0.775f + 0.5f, 0.0f, 1.0f);
}

HostTensor modulate_caustics(const HostTensor& clean, const HostTensor& depth,
                             const CameraFrame& cam, const CausticConfig& cfg, int t) {
    require(clean.shape.ndim == 3 && clean.channels() == 3, "modulate_caustics: clean must be [3,H,W]");
    const int H = clean.height(), W = clean.width();
    require(depth.height() == H && depth.width() == W, "modulate_caustics: depth shape mismatch");
    HostTensor out(clean.shape);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const float z = depth.at(0, y, x);
            // Back-project through camera-space z to the world point.
            const Vec3 pc{(x - cam.cx) / cam.fx * z, (y - cam.cy) / cam.fy * z, z};
            const Vec3 pw = mat3_tmul(cam.rotation, {pc[0] - cam.translation[0],
                                                     pc[1] - cam.translation[1],
                                                     pc[2] - cam.translation[2]});
            const float cv = caustic_value(cfg, pw[0], pw[1], t);
            const float gain = 1.0f + cfg.amplitude * (2.0f * cv - 1.0f);
            for (int c = 0; c < 3; ++c) out.at(c, y, x) = clean.at(c, y, x) * gain;
        }
    }
    return out;
}

} // namespace uwgs
