// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#include "renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace uwgs {

namespace {

// Per-splat value cache shared by both compositors; all visit/skip decisions
// are made from these floats, so recorded and plain renders walk identical
// pixel sets.
struct SplatCache {
    float inv_a, inv_b2, inv_c;
    float mx, my, o, z;
    int x0, x1, y0, y1;
    bool valid;
};

SplatCache make_cache(float va, float vb, float vc, float mx, float my, float o, float z,
                      int width, int height) {
    SplatCache c{};
    c.valid = false;
    const float det = va * vc - vb * vb;
    if (det <= 0) return c;
    c.inv_a = vc / det;
    c.inv_b2 = -2.0f * vb / det;
    c.inv_c = va / det;
    c.mx = mx;
    c.my = my;
    c.o = o;
    c.z = z;
    // 3-sigma box from the largest eigenvalue.
    const float mid = 0.5f * (va + vc);
    const float lmax = mid + std::sqrt(std::max(mid * mid - det, 0.0f));
    const float rad = 3.0f * std::sqrt(lmax);
    c.x0 = std::max(0, static_cast<int>(std::floor(mx - rad)));
    c.x1 = std::min(width - 1, static_cast<int>(std::ceil(mx + rad)));
    c.y0 = std::max(0, static_cast<int>(std::floor(my - rad)));
    c.y1 = std::min(height - 1, static_cast<int>(std::ceil(my + rad)));
    c.valid = c.x0 <= c.x1 && c.y0 <= c.y1;
    return c;
}

// Depth-sorted front-to-back traversal over 3-sigma boxes. Contributions with
// alpha < 1/255 are skipped. The policy receives one call per contribution.
template <class Policy>
void composite(std::span<const SplatCache> caches, std::span<const float> depths, Policy&& pol) {
    std::vector<int> order(caches.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return depths[i] < depths[j]; });
    constexpr float kMinAlpha = 1.0f / 255.0f;
    for (int si : order) {
        const SplatCache& c = caches[si];
        if (!c.valid) continue;
        if (!pol.begin_splat(si)) continue;
        for (int y = c.y0; y <= c.y1; ++y)
            for (int x = c.x0; x <= c.x1; ++x) {
                const float av =
                    splat_alpha_eval(c.inv_a, c.inv_b2, c.inv_c, c.mx, c.my, c.o,
                                     static_cast<float>(x), static_cast<float>(y));
                if (av < kMinAlpha) continue;
                pol.contribute(si, x, y, av);
            }
    }
}

} // namespace

RenderOutput render_plain(const std::vector<Splat2D<float>>& splats, int width, int height,
                          Vec3 background) {
    const int64_t hw = static_cast<int64_t>(width) * height;
    std::vector<SplatCache> caches(splats.size());
    std::vector<float> depths(splats.size());
    for (size_t i = 0; i < splats.size(); ++i) {
        const auto& s = splats[i];
        caches[i] = make_cache(s.cov_a, s.cov_b, s.cov_c, s.mean_x, s.mean_y,
                               s.alpha_base, s.depth, width, height);
        depths[i] = s.depth;
    }

    struct Plain {
        const std::vector<Splat2D<float>>& splats;
        int width;
        std::vector<float> rgb, depth_acc, alpha_acc, transmit;

        bool begin_splat(int) { return true; }
        void contribute(int si, int x, int y, float alpha) {
            const Splat2D<float>& sp = splats[si];
            const int64_t hw = transmit.size();
            const int64_t pi = static_cast<int64_t>(y) * width + x;
            const float at = alpha * transmit[pi];
            for (int c = 0; c < 3; ++c) rgb[c * hw + pi] = rgb[c * hw + pi] + sp.color[c] * at;
            depth_acc[pi] = depth_acc[pi] + sp.depth * at;
            alpha_acc[pi] = alpha_acc[pi] + at;
            transmit[pi] = transmit[pi] * (1.0f - alpha);
        }
    } pol{splats, width, {}, {}, {}, {}};
    pol.rgb.assign(3 * hw, 0.0f);
    pol.depth_acc.assign(hw, 0.0f);
    pol.alpha_acc.assign(hw, 0.0f);
    pol.transmit.assign(hw, 1.0f);
    composite(caches, depths, pol);

    RenderOutput out;
    out.image = HostTensor(Shape{3, height, width});
    out.depth = HostTensor(Shape{1, height, width});
    out.alpha = HostTensor(Shape{1, height, width});
    for (int64_t i = 0; i < hw; ++i) {
        const float t_final = 1.0f - pol.alpha_acc[i];
        for (int c = 0; c < 3; ++c)
            out.image.data[c * hw + i] = pol.rgb[c * hw + i] + background[c] * t_final;
        out.depth.data[i] = pol.depth_acc[i] / (pol.alpha_acc[i] + 1e-8f);
        out.alpha.data[i] = pol.alpha_acc[i];
    }
    return out;
}

RenderTapeOutput render_tape(Tape& t, const std::vector<Splat2D<Expr>>& splats, int width, int height,
                             Vec3 background) {
    const int64_t hw = static_cast<int64_t>(width) * height;
    // Inverse covariance as recorded nodes; their forward values drive the
    // shared visit/skip logic, so tape and plain renders agree bitwise.
    struct SplatIds {
        Tape::Id alpha_in[6]; // inv_a, inv_b2, inv_c, mean_x, mean_y, opacity
        Tape::Id color[3];
        Tape::Id depth;
    };
    std::vector<SplatIds> ids(splats.size());
    std::vector<SplatCache> caches(splats.size());
    std::vector<float> depths(splats.size());
    for (size_t i = 0; i < splats.size(); ++i) {
        const Splat2D<Expr>& s = splats[i];
        Expr det = s.cov_a * s.cov_c - s.cov_b * s.cov_b;
        Expr inv_a = s.cov_c / det;
        Expr inv_b2 = -2.0f * s.cov_b / det;
        Expr inv_c = s.cov_a / det;
        ids[i] = SplatIds{{inv_a.id, inv_b2.id, inv_c.id, s.mean_x.id, s.mean_y.id, s.alpha_base.id},
                          {s.color[0].id, s.color[1].id, s.color[2].id},
                          s.depth.id};
        caches[i] = make_cache(value_of(s.cov_a), value_of(s.cov_b), value_of(s.cov_c),
                               value_of(s.mean_x), value_of(s.mean_y), value_of(s.alpha_base),
                               value_of(s.depth), width, height);
        depths[i] = value_of(s.depth);
    }

    const Tape::Id zero = t.constant_scalar(0.0f);
    const Tape::Id one = t.constant_scalar(1.0f);

    // Records one node per operation of the plain compositor, with values
    // computed inline by the same float expressions the generic forward uses.
    struct Taped {
        Tape& t;
        const std::vector<SplatIds>& ids;
        int width;
        std::vector<Tape::Id> rgb, depth_acc, alpha_acc, transmit;
        int aux6 = -1; // current splat's alpha-input aux block
        float color_v[3] = {0, 0, 0};
        float depth_v = 0;
        const SplatIds* sp = nullptr;

        bool begin_splat(int si) {
            sp = &ids[si];
            aux6 = t.push_aux(std::span<const Tape::Id>(sp->alpha_in, 6));
            for (int c = 0; c < 3; ++c) color_v[c] = t.sval(sp->color[c]);
            depth_v = t.sval(sp->depth);
            return true;
        }
        void contribute(int, int x, int y, float av) {
            const int64_t hw = transmit.size();
            const int64_t pi = static_cast<int64_t>(y) * width + x;
            using Op = Tape::Op;
            const float tv = t.sval(transmit[pi]);
            const float at = av * tv;
            Tape::Id alpha = t.record_scalar(Op::SplatAlpha, Tape::kNone, Tape::kNone, aux6,
                                             static_cast<float>(x), static_cast<float>(y), av);
            Tape::Id at_id = t.record_scalar(Op::Mul, alpha, transmit[pi], -1, 0, 0, at);
            for (int c = 0; c < 3; ++c) {
                Tape::Id acc = rgb[c * hw + pi];
                int32_t a1 = t.push_aux(std::span<const Tape::Id>(&acc, 1));
                rgb[c * hw + pi] = t.record_scalar(Op::Fma, sp->color[c], at_id, a1, 0, 0,
                                                   t.sval(acc) + color_v[c] * at);
            }
            {
                Tape::Id acc = depth_acc[pi];
                int32_t a1 = t.push_aux(std::span<const Tape::Id>(&acc, 1));
                depth_acc[pi] = t.record_scalar(Op::Fma, sp->depth, at_id, a1, 0, 0,
                                                t.sval(acc) + depth_v * at);
            }
            alpha_acc[pi] = t.record_scalar(Op::Add, alpha_acc[pi], at_id, -1, 0, 0,
                                            t.sval(alpha_acc[pi]) + at);
            transmit[pi] =
                t.record_scalar(Op::MulOneMinus, transmit[pi], alpha, -1, 0, 0, tv * (1.0f - av));
        }
    } pol{t, ids, width, {}, {}, {}, {}, -1, {0, 0, 0}, 0, nullptr};
    pol.rgb.assign(3 * hw, zero);
    pol.depth_acc.assign(hw, zero);
    pol.alpha_acc.assign(hw, zero);
    pol.transmit.assign(hw, one);
    composite(caches, depths, pol);

    std::vector<Tape::Id> flat(static_cast<size_t>(3 * hw));
    for (int64_t i = 0; i < 3 * hw; ++i) flat[i] = pol.rgb[i];
    RenderTapeOutput out;
    Tape::Id raw_image = t.concat(flat, Shape{3, height, width});
    out.alpha = t.concat(std::span<const Tape::Id>(pol.alpha_acc.data(), static_cast<size_t>(hw)),
                         Shape{1, height, width});
    Tape::Id raw_depth =
        t.concat(std::span<const Tape::Id>(pol.depth_acc.data(), static_cast<size_t>(hw)),
                 Shape{1, height, width});

    out.depth = t.div(raw_depth, t.add_c(out.alpha, 1e-8f));
    if (background[0] != 0 || background[1] != 0 || background[2] != 0) {
        // image += bg_c * (1 - alpha), per channel.
        Tape::Id t_final = t.rsub_c(out.alpha, 1.0f);
        std::array<Tape::Id, 3> chans;
        for (int c = 0; c < 3; ++c) {
            Tape::Id ch = t.slice(raw_image, c * hw, hw);
            Tape::Id bg = t.mul_c(t.slice(t_final, 0, hw), background[c]);
            chans[c] = t.add(ch, bg);
        }
        out.image = t.concat(std::span<const Tape::Id>(chans.data(), 3), Shape{3, height, width});
    } else {
        out.image = raw_image;
    }
    return out;
}

RenderOutput render_cloud(const GaussianCloud& cloud, const CameraFrame& cam, Vec3 background,
                          const std::vector<float>* colors) {
    std::vector<Splat2D<float>> splats;
    splats.reserve(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
        GaussianAttrs<float> g;
        for (int k = 0; k < 3; ++k) {
            g.pos[k] = cloud.positions[i * 3 + k];
            g.log_scale[k] = cloud.log_scales[i * 3 + k];
        }
        for (int k = 0; k < 4; ++k) g.rot[k] = cloud.rotations[i * 4 + k];
        g.opacity_logit = cloud.opacity_logits[i];
        if (colors) {
            for (int k = 0; k < 3; ++k) g.color[k] = (*colors)[i * 3 + k];
        } else {
            Vec3 c = cloud.intrinsic_color(i);
            for (int k = 0; k < 3; ++k) g.color[k] = c[k];
        }
        auto s = project_gaussian(g, cam);
        if (s) {
            s->input_index = static_cast<int>(i);
            splats.push_back(*s);
        }
    }
    return render_plain(splats, cam.width, cam.height, background);
}

} // namespace uwgs
