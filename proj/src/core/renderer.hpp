// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "expr.hpp"
#include "scene.hpp"
#include "tape.hpp"

namespace uwgs {

inline float rsqrt(float x) { return 1.0f / std::sqrt(x); }
inline Expr rsqrt(Expr a) { return {a.tape, a.tape->pow_c(a.id, -0.5f)}; }
inline float sigmoid(float x) { return sigmoidf(x); }
inline Expr sigmoid(Expr a) { return {a.tape, a.tape->sigmoid(a.id)}; }
inline Expr operator/(float c, Expr a) { return {a.tape, a.tape->mul_c(a.tape->pow_c(a.id, -1.0f), c)}; }

// One Gaussian's attributes plus its per-frame color, either as plain floats
// or as tape expressions.
template <class S>
struct GaussianAttrs {
    S pos[3];
    S log_scale[3];
    S rot[4]; // (w,x,y,z), not necessarily normalized; normalization is part of the graph
    S opacity_logit;
    S color[3];
};

// Screen-space splat. cov2d is symmetric [[a,b],[b,c]] with the +0.3 dilation
// already applied; alpha_base is the decoded opacity.
template <class S>
struct Splat2D {
    S mean_x, mean_y;
    S cov_a, cov_b, cov_c;
    S depth;
    S color[3];
    S alpha_base;
    int input_index = 0;
};

// EWA-style projection. Returns nullopt when the center is behind the near
// plane (z <= 0.01). Differentiable in every Gaussian attribute.
template <class S>
std::optional<Splat2D<S>> project_gaussian(const GaussianAttrs<S>& g, const CameraFrame& cam) {
    const Mat3& R = cam.rotation;
    const Vec3& T = cam.translation;
    S px = R[0] * g.pos[0] + R[1] * g.pos[1] + R[2] * g.pos[2] + T[0];
    S py = R[3] * g.pos[0] + R[4] * g.pos[1] + R[5] * g.pos[2] + T[1];
    S pz = R[6] * g.pos[0] + R[7] * g.pos[1] + R[8] * g.pos[2] + T[2];
    if (value_of(pz) <= 0.01f) return std::nullopt;

    // Rotation matrix from the normalized quaternion.
    S n2 = g.rot[0] * g.rot[0] + g.rot[1] * g.rot[1] + g.rot[2] * g.rot[2] + g.rot[3] * g.rot[3];
    S inv_n = rsqrt(n2);
    S qw = g.rot[0] * inv_n, qx = g.rot[1] * inv_n, qy = g.rot[2] * inv_n, qz = g.rot[3] * inv_n;
    S r00 = 1.0f - 2.0f * (qy * qy + qz * qz);
    S r01 = 2.0f * (qx * qy - qw * qz);
    S r02 = 2.0f * (qx * qz + qw * qy);
    S r10 = 2.0f * (qx * qy + qw * qz);
    S r11 = 1.0f - 2.0f * (qx * qx + qz * qz);
    S r12 = 2.0f * (qy * qz - qw * qx);
    S r20 = 2.0f * (qx * qz - qw * qy);
    S r21 = 2.0f * (qy * qz + qw * qx);
    S r22 = 1.0f - 2.0f * (qx * qx + qy * qy);

    // L = R_g * diag(exp(log_scale)); world covariance = L L^T.
    S s0 = exp(g.log_scale[0]), s1 = exp(g.log_scale[1]), s2 = exp(g.log_scale[2]);
    S l00 = r00 * s0, l01 = r01 * s1, l02 = r02 * s2;
    S l10 = r10 * s0, l11 = r11 * s1, l12 = r12 * s2;
    S l20 = r20 * s0, l21 = r21 * s1, l22 = r22 * s2;
    S c00 = l00 * l00 + l01 * l01 + l02 * l02;
    S c01 = l00 * l10 + l01 * l11 + l02 * l12;
    S c02 = l00 * l20 + l01 * l21 + l02 * l22;
    S c11 = l10 * l10 + l11 * l11 + l12 * l12;
    S c12 = l10 * l20 + l11 * l21 + l12 * l22;
    S c22 = l20 * l20 + l21 * l21 + l22 * l22;

    // Camera-frame covariance V = W C W^T with W the (constant) camera rotation.
    auto rowmul = [&](int r0i) {
        // (W row r0i) * C -> 3-vector
        float w0 = R[r0i * 3], w1 = R[r0i * 3 + 1], w2 = R[r0i * 3 + 2];
        struct Row { S x, y, z; };
        return Row{w0 * c00 + w1 * c01 + w2 * c02, w0 * c01 + w1 * c11 + w2 * c12,
                   w0 * c02 + w1 * c12 + w2 * c22};
    };
    auto wc0 = rowmul(0), wc1 = rowmul(1), wc2 = rowmul(2);
    auto dotw = [&](decltype(wc0)& row, int ri) {
        return row.x * R[ri * 3] + row.y * R[ri * 3 + 1] + row.z * R[ri * 3 + 2];
    };
    S v00 = dotw(wc0, 0), v01 = dotw(wc0, 1), v02 = dotw(wc0, 2);
    S v11 = dotw(wc1, 1), v12 = dotw(wc1, 2), v22 = dotw(wc2, 2);

    // Perspective Jacobian J = [[fx/z, 0, -fx x/z^2], [0, fy/z, -fy y/z^2]].
    S inv_z = 1.0f / pz;
    S inv_z2 = inv_z * inv_z;
    S j00 = cam.fx * inv_z;
    S j02 = -cam.fx * px * inv_z2;
    S j11 = cam.fy * inv_z;
    S j12 = -cam.fy * py * inv_z2;

    // cov2d = J V J^T + 0.3 I (screen-space dilation).
    S a = j00 * (j00 * v00 + j02 * v02) + j02 * (j00 * v02 + j02 * v22) + 0.3f;
    S b = j00 * (j11 * v01 + j12 * v02) + j02 * (j11 * v12 + j12 * v22);
    S c = j11 * (j11 * v11 + j12 * v12) + j12 * (j11 * v12 + j12 * v22) + 0.3f;

    Splat2D<S> s;
    s.mean_x = cam.fx * px * inv_z + cam.cx;
    s.mean_y = cam.fy * py * inv_z + cam.cy;
    s.cov_a = a;
    s.cov_b = b;
    s.cov_c = c;
    s.depth = pz;
    s.alpha_base = sigmoid(g.opacity_logit);
    for (int k = 0; k < 3; ++k) s.color[k] = g.color[k];
    return s;
}

struct RenderOutput {
    HostTensor image; // [3,H,W]
    HostTensor depth; // [1,H,W] alpha-normalized expected camera z
    HostTensor alpha; // [1,H,W]
};

struct RenderTapeOutput {
    Tape::Id image = Tape::kNone;
    Tape::Id depth = Tape::kNone;
    Tape::Id alpha = Tape::kNone;
};

RenderOutput render_plain(const std::vector<Splat2D<float>>& splats, int width, int height, Vec3 background);
RenderTapeOutput render_tape(Tape& t, const std::vector<Splat2D<Expr>>& splats, int width, int height,
                             Vec3 background);

// Convenience: project + render a whole cloud with externally supplied
// per-Gaussian colors ([N*3], defaults to decoded intrinsic colors).
RenderOutput render_cloud(const GaussianCloud& cloud, const CameraFrame& cam, Vec3 background,
                          const std::vector<float>* colors = nullptr);

} // namespace uwgs
