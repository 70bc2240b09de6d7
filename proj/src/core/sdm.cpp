// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#include "sdm.hpp"

#include <cmath>

#include "rng.hpp"

namespace uwgs {

std::vector<ParamTensor*> SdmParams::all() {
    std::vector<ParamTensor*> v;
    for (auto* grp : {&wpe, &ibf, &hash, &omega, &decoder})
        for (ParamTensor& t : *grp) v.push_back(&t);
    return v;
}
std::vector<const ParamTensor*> SdmParams::all() const {
    std::vector<const ParamTensor*> v;
    for (auto* grp : {&wpe, &ibf, &hash, &omega, &decoder})
        for (const ParamTensor& t : *grp) v.push_back(&t);
    return v;
}

namespace {

void fill_uniform(ParamTensor& t, float lo, float hi, Pcg32& rng) {
    for (float& v : t.data) v = rng.uniform(lo, hi);
}

// fan-in scaled uniform init; biases stay zero.
void init_weight(ParamTensor& w, int fan_in, Pcg32& rng) {
    const float s = 1.0f / std::sqrt(static_cast<float>(fan_in));
    fill_uniform(w, -s, s, rng);
}

} // namespace

SdmParams init_sdm(const SdmConfig& cfg, uint64_t seed) {
    require(cfg.net_res % 8 == 0, "init_sdm: net_res must be divisible by 8");
    SdmParams p;
    p.cfg = cfg;
    const int fr = cfg.net_res / 8; // feature resolution after three pools

    Pcg32 rng(seed, 0x5d0);
    p.wpe.emplace_back("wpe.dw1", Shape{6, 3, 3});
    p.wpe.emplace_back("wpe.pw1", Shape{16, 6});
    p.wpe.emplace_back("wpe.b1", Shape{16});
    p.wpe.emplace_back("wpe.dw2", Shape{16, 3, 3});
    p.wpe.emplace_back("wpe.pw2", Shape{32, 16});
    p.wpe.emplace_back("wpe.b2", Shape{32});
    p.wpe.emplace_back("wpe.dw3", Shape{32, 3, 3});
    p.wpe.emplace_back("wpe.pw3", Shape{64, 32});
    p.wpe.emplace_back("wpe.b3", Shape{64});
    p.wpe.emplace_back("wpe.head_w", Shape{9, 64 * fr * fr});
    p.wpe.emplace_back("wpe.head_b", Shape{9});
    init_weight(p.wpe[0], 9, rng);
    init_weight(p.wpe[1], 6, rng);
    init_weight(p.wpe[3], 9, rng);
    init_weight(p.wpe[4], 16, rng);
    init_weight(p.wpe[6], 9, rng);
    init_weight(p.wpe[7], 32, rng);
    init_weight(p.wpe[9], 64 * fr * fr, rng);

    p.ibf.emplace_back("ibf.dw1", Shape{3, 3, 3});
    p.ibf.emplace_back("ibf.pw1", Shape{16, 3});
    p.ibf.emplace_back("ibf.b1", Shape{16});
    p.ibf.emplace_back("ibf.skip1", Shape{16, 3});
    p.ibf.emplace_back("ibf.dw2", Shape{16, 3, 3});
    p.ibf.emplace_back("ibf.pw2", Shape{16, 16});
    p.ibf.emplace_back("ibf.b2", Shape{16});
    p.ibf.emplace_back("ibf.dw3", Shape{16, 3, 3});
    p.ibf.emplace_back("ibf.pw3", Shape{16, 16});
    p.ibf.emplace_back("ibf.b3", Shape{16});
    init_weight(p.ibf[0], 9, rng);
    init_weight(p.ibf[1], 3, rng);
    init_weight(p.ibf[3], 3, rng);
    init_weight(p.ibf[4], 9, rng);
    init_weight(p.ibf[5], 16, rng);
    init_weight(p.ibf[7], 9, rng);
    init_weight(p.ibf[8], 16, rng);

    const int rows = cfg.hash_levels * (1 << cfg.hash_log2);
    p.hash.emplace_back("hash.table", Shape{rows, cfg.hash_features});
    fill_uniform(p.hash[0], -1e-4f, 1e-4f, rng);

    p.omega.emplace_back("omega.w1", Shape{16, 3});
    p.omega.emplace_back("omega.b1", Shape{16});
    p.omega.emplace_back("omega.w2", Shape{32, 16});
    p.omega.emplace_back("omega.b2", Shape{32});
    init_weight(p.omega[0], 3, rng);
    init_weight(p.omega[2], 16, rng);

    p.decoder.emplace_back("decoder.w1", Shape{64, 96});
    p.decoder.emplace_back("decoder.b1", Shape{64});
    p.decoder.emplace_back("decoder.w2", Shape{64, 64});
    p.decoder.emplace_back("decoder.b2", Shape{64});
    p.decoder.emplace_back("decoder.w3", Shape{3, 64});
    p.decoder.emplace_back("decoder.b3", Shape{3});
    init_weight(p.decoder[0], 96, rng);
    init_weight(p.decoder[2], 64, rng);
    init_weight(p.decoder[4], 64, rng);
    return p;
}

SdmLeaves make_sdm_leaves(Tape& t, const SdmParams& p) {
    SdmLeaves l;
    auto mk = [&](const std::vector<ParamTensor>& grp, std::vector<Tape::Id>& out) {
        out.reserve(grp.size());
        for (const ParamTensor& pt : grp) out.push_back(t.leaf(pt.data, pt.shape));
    };
    mk(p.wpe, l.wpe);
    mk(p.ibf, l.ibf);
    mk(p.hash, l.hash);
    mk(p.omega, l.omega);
    mk(p.decoder, l.decoder);
    return l;
}

HostTensor make_wpe_input(const HostTensor& degraded, const HostTensor& pseudo_depth, int net_res) {
    HostTensor img = resize_bilinear(degraded, net_res, net_res);
    HostTensor dep = resize_bilinear(pseudo_depth, net_res, net_res);
    HostTensor out(Shape{6, net_res, net_res});
    const int64_t hw = static_cast<int64_t>(net_res) * net_res;
    for (int c = 0; c < 3; ++c)
        for (int64_t i = 0; i < hw; ++i) {
            out.data[c * hw + i] = dep.data[i] * img.data[c * hw + i]; // depth-aware enhancement
            out.data[(c + 3) * hw + i] = img.data[c * hw + i];
        }
    return out;
}

HostTensor make_ibf_input(const HostTensor& degraded, int net_res) {
    return resize_bilinear(degraded, net_res, net_res);
}

namespace {

// DW-separable block: depthwise 3x3, pointwise mix, bias, ReLU, 2x2 pool.
Tape::Id dw_block(Tape& t, Tape::Id x, Tape::Id dw, Tape::Id pw, Tape::Id b) {
    return t.avg_pool2(t.relu(t.add_chan(t.pw_conv(t.dw_conv(x, dw), pw), b)));
}

} // namespace

WaterIds predict_water(Tape& t, const SdmLeaves& l, const SdmParams& p, const HostTensor& wpe_input6) {
    require(wpe_input6.channels() == 6 && wpe_input6.height() == p.cfg.net_res &&
                wpe_input6.width() == p.cfg.net_res,
            "predict_water: input must be [6,net,net]");
    Tape::Id x = t.constant(wpe_input6.data, wpe_input6.shape);
    x = dw_block(t, x, l.wpe[0], l.wpe[1], l.wpe[2]);
    x = dw_block(t, x, l.wpe[3], l.wpe[4], l.wpe[5]);
    x = dw_block(t, x, l.wpe[6], l.wpe[7], l.wpe[8]);
    const int fr = p.cfg.net_res / 8;
    Tape::Id flat = t.concat(std::span<const Tape::Id>(&x, 1), Shape{64 * fr * fr});
    Tape::Id raw = t.add(t.matmul(l.wpe[9], flat), l.wpe[10]);
    WaterIds w;
    // f32 sigmoid saturates to exact 0/1; keep A strictly inside (0,1).
    w.ambient = t.clamp(t.sigmoid(t.slice(raw, 0, 3)), 1e-6f, 1.0f - 1e-6f);
    w.attenuation = t.add_c(t.softplus(t.slice(raw, 3, 3)), 1e-4f);
    w.backscatter = t.add_c(t.softplus(t.slice(raw, 6, 3)), 1e-4f);
    return w;
}

BrightnessIds encode_brightness(Tape& t, const SdmLeaves& l, const SdmParams& p,
                                const HostTensor& ibf_input3) {
    require(ibf_input3.channels() == 3 && ibf_input3.height() == p.cfg.net_res &&
                ibf_input3.width() == p.cfg.net_res,
            "encode_brightness: input must be [3,net,net]");
    Tape::Id x = t.constant(ibf_input3.data, ibf_input3.shape);
    // Stage 1 with a 1x1 channel-matching shortcut, stages 2 and 3 with
    // identity shortcuts; each stage pools after the skip-add.
    Tape::Id h1 = t.relu(t.add_chan(t.pw_conv(t.dw_conv(x, l.ibf[0]), l.ibf[1]), l.ibf[2]));
    Tape::Id y1 = t.avg_pool2(t.add(h1, t.pw_conv(x, l.ibf[3])));
    Tape::Id h2 = t.relu(t.add_chan(t.pw_conv(t.dw_conv(y1, l.ibf[4]), l.ibf[5]), l.ibf[6]));
    Tape::Id y2 = t.avg_pool2(t.add(h2, y1));
    Tape::Id h3 = t.relu(t.add_chan(t.pw_conv(t.dw_conv(y2, l.ibf[7]), l.ibf[8]), l.ibf[9]));
    Tape::Id y3 = t.avg_pool2(t.add(h3, y2));
    BrightnessIds out;
    out.feature_map = y3;
    out.global_vec = t.gap(y3);
    return out;
}

Tape::Id hash_encode(Tape& t, Tape::Id table_leaf, const SdmConfig& cfg, const Vec3& position,
                     const SceneBounds& bounds) {
    const int L = cfg.hash_levels;
    const int rows_per_level = 1 << cfg.hash_log2;
    const float growth =
        L > 1 ? std::exp(std::log(cfg.hash_max_res / cfg.hash_base_res) / (L - 1)) : 1.0f;

    float u[3];
    for (int k = 0; k < 3; ++k) {
        const float lo = bounds.center[k] - bounds.extent;
        u[k] = clampf((position[k] - lo) / (2.0f * bounds.extent), 0.0f, 1.0f);
    }

    std::vector<Tape::Id> levels(L);
    float res = cfg.hash_base_res;
    for (int lvl = 0; lvl < L; ++lvl) {
        const float n = std::floor(res);
        uint32_t c0[3];
        float frac[3];
        for (int k = 0; k < 3; ++k) {
            const float pos = u[k] * n;
            const float fl = std::floor(pos);
            c0[k] = static_cast<uint32_t>(fl);
            frac[k] = pos - fl;
        }
        int32_t idx[8];
        float w[8];
        for (int corner = 0; corner < 8; ++corner) {
            uint32_t cx = c0[0] + (corner & 1);
            uint32_t cy = c0[1] + ((corner >> 1) & 1);
            uint32_t cz = c0[2] + ((corner >> 2) & 1);
            const uint32_t h = (cx * 1u) ^ (cy * 2654435761u) ^ (cz * 805459861u);
            idx[corner] = static_cast<int32_t>(h % static_cast<uint32_t>(rows_per_level)) +
                          lvl * rows_per_level;
            const float wx = (corner & 1) ? frac[0] : 1.0f - frac[0];
            const float wy = ((corner >> 1) & 1) ? frac[1] : 1.0f - frac[1];
            const float wz = ((corner >> 2) & 1) ? frac[2] : 1.0f - frac[2];
            w[corner] = wx * wy * wz;
        }
        levels[lvl] = t.hash_gather(table_leaf, idx, w);
        res *= growth;
    }
    return t.concat(levels, Shape{L * cfg.hash_features});
}

Tape::Id omega_encode(Tape& t, const SdmLeaves& l, Tape::Id color3) {
    Tape::Id h = t.relu(t.add(t.matmul(l.omega[0], color3), l.omega[1]));
    return t.add(t.matmul(l.omega[2], h), l.omega[3]);
}

Tape::Id decode_epsilon(Tape& t, const SdmLeaves& l, Tape::Id concat96) {
    Tape::Id h1 = t.relu(t.add(t.matmul(l.decoder[0], concat96), l.decoder[1]));
    Tape::Id h2 = t.relu(t.add(t.matmul(l.decoder[2], h1), l.decoder[3]));
    return t.add(t.matmul(l.decoder[4], h2), l.decoder[5]);
}

Tape::Id predict_epsilon(Tape& t, const SdmLeaves& l, const SdmParams& p, const BrightnessIds& br,
                         Expr mean_x, Expr mean_y, const CameraFrame& cam, const Vec3& position,
                         const SceneBounds& bounds, Tape::Id color3) {
    Tape::Id u = t.mul_c(mean_x.id, 1.0f / static_cast<float>(cam.width));
    Tape::Id v = t.mul_c(mean_y.id, 1.0f / static_cast<float>(cam.height));
    std::array<Tape::Id, 2> uv_parts{u, v};
    Tape::Id uv = t.concat(uv_parts, Shape{2});
    Tape::Id f_l = t.bilinear(br.feature_map, uv);
    Tape::Id phi = hash_encode(t, l.hash[0], p.cfg, position, bounds);
    Tape::Id om = omega_encode(t, l, color3);
    std::array<Tape::Id, 4> parts{f_l, br.global_vec, phi, om};
    Tape::Id in96 = t.concat(parts, Shape{96});
    return decode_epsilon(t, l, in96);
}

CloudLeaves make_cloud_leaves(Tape& t, const GaussianCloud& cloud) {
    const int32_t n = static_cast<int32_t>(cloud.size());
    CloudLeaves cl;
    cl.positions = t.leaf(cloud.positions, Shape{n * 3});
    cl.log_scales = t.leaf(cloud.log_scales, Shape{n * 3});
    cl.rotations = t.leaf(cloud.rotations, Shape{n * 4});
    cl.opacity_logits = t.leaf(cloud.opacity_logits, Shape{n});
    cl.color_logits = t.leaf(cloud.intrinsic_color_logits, Shape{n * 3});
    return cl;
}

FrameForward sdm_frame_forward(Tape& t, const CloudLeaves& cl, size_t n_gaussians,
                               const SdmLeaves& sl, const SdmParams& p, const CameraFrame& cam,
                               const HostTensor& wpe_input6, const HostTensor& ibf_input3,
                               const SceneBounds& bounds, const SdmFlags& flags,
                               const GaussianCloud& cloud_values) {
    FrameForward out;
    if (flags.use_sd) {
        out.water = predict_water(t, sl, p, wpe_input6);
        if (flags.detach_sd) {
            out.water.ambient = t.detach(out.water.ambient);
            out.water.attenuation = t.detach(out.water.attenuation);
            out.water.backscatter = t.detach(out.water.backscatter);
        }
    }
    BrightnessIds br;
    if (flags.use_td) br = encode_brightness(t, sl, p, ibf_input3);

    const Vec3 cam_center = cam.center();
    out.splats.reserve(n_gaussians);
    for (size_t i = 0; i < n_gaussians; ++i) {
        GaussianAttrs<Expr> g;
        for (int k = 0; k < 3; ++k) {
            g.pos[k] = Expr{&t, t.slice(cl.positions, static_cast<int64_t>(i) * 3 + k, 1)};
            g.log_scale[k] = Expr{&t, t.slice(cl.log_scales, static_cast<int64_t>(i) * 3 + k, 1)};
        }
        for (int k = 0; k < 4; ++k)
            g.rot[k] = Expr{&t, t.slice(cl.rotations, static_cast<int64_t>(i) * 4 + k, 1)};
        g.opacity_logit = Expr{&t, t.slice(cl.opacity_logits, static_cast<int64_t>(i), 1)};
        Tape::Id color3 = t.sigmoid(t.slice(cl.color_logits, static_cast<int64_t>(i) * 3, 3));
        Expr zero{&t, t.constant_scalar(0.0f)};
        g.color[0] = g.color[1] = g.color[2] = zero;

        auto splat = project_gaussian(g, cam);
        if (!splat) continue;

        // Viewpoint distance r_it, differentiable w.r.t. the position.
        Expr dx = g.pos[0] - cam_center[0];
        Expr dy = g.pos[1] - cam_center[1];
        Expr dz = g.pos[2] - cam_center[2];
        Expr r = sqrt(dx * dx + dy * dy + dz * dz);

        Tape::Id eps = Tape::kNone;
        if (flags.use_td) {
            eps = predict_epsilon(t, sl, p, br, splat->mean_x, splat->mean_y, cam,
                                  cloud_values.position(i), bounds, color3);
            if (flags.detach_td) eps = t.detach(eps);
            out.epsilons.push_back(eps);
        }

        Tape::Id cit;
        if (flags.use_sd) {
            cit = degrade_color_tape(t, color3, out.water.ambient, out.water.attenuation,
                                     out.water.backscatter, r.id, eps);
        } else {
            cit = eps != Tape::kNone ? t.add(color3, eps) : color3;
        }
        for (int k = 0; k < 3; ++k) splat->color[k] = Expr{&t, t.slice(cit, k, 1)};
        splat->input_index = static_cast<int>(out.splats.size());
        out.gaussian_index.push_back(static_cast<int>(i));
        out.splats.push_back(*splat);
    }
    return out;
}

WaterParams predict_water_values(const SdmParams& p, const HostTensor& degraded,
                                 const HostTensor& pseudo_depth) {
    Tape t;
    SdmLeaves l;
    for (const ParamTensor& pt : p.wpe) l.wpe.push_back(t.leaf(pt.data, pt.shape));
    HostTensor in6 = make_wpe_input(degraded, pseudo_depth, p.cfg.net_res);
    WaterIds w = predict_water(t, l, p, in6);
    WaterParams out;
    auto a = t.val(w.ambient);
    auto b = t.val(w.attenuation);
    auto g = t.val(w.backscatter);
    for (int k = 0; k < 3; ++k) {
        out.ambient[k] = a[k];
        out.attenuation[k] = b[k];
        out.backscatter[k] = g[k];
    }
    return out;
}

} // namespace uwgs
