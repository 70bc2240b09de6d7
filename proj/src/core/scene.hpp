// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace uwgs {

using Vec3 = std::array<float, 3>;
using Vec4 = std::array<float, 4>; // quaternion (w,x,y,z)
using Mat3 = std::array<float, 9>; // row-major

inline Vec3 mat3_mul(const Mat3& m, const Vec3& v) {
    return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
            m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
            m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

inline Vec3 mat3_tmul(const Mat3& m, const Vec3& v) { // transpose(m) * v
    return {m[0] * v[0] + m[3] * v[1] + m[6] * v[2],
            m[1] * v[0] + m[4] * v[1] + m[7] * v[2],
            m[2] * v[0] + m[5] * v[1] + m[8] * v[2]};
}

Mat3 quat_to_mat3(const Vec4& q);
Vec4 quat_normalize(const Vec4& q);

// One training/eval view: pinhole intrinsics, world-to-camera pose, the
// observed degraded image and its pseudo-depth prior. `t` is the frame
// ordinal in capture order.
struct CameraFrame {
    float fx = 0, fy = 0, cx = 0, cy = 0;
    Mat3 rotation{1, 0, 0, 0, 1, 0, 0, 0, 1}; // world-to-camera
    Vec3 translation{0, 0, 0};
    int width = 0, height = 0;
    int t = 0;
    std::string name;
    HostTensor degraded_image; // [3,H,W] in [0,1]; may be empty for pose-only use
    HostTensor pseudo_depth;   // [1,H,W] in [0,1], higher = more distant

    Vec3 center() const { // -R^T T
        Vec3 c = mat3_tmul(rotation, translation);
        return {-c[0], -c[1], -c[2]};
    }
};

// Paired Intrinsic/Degraded Gaussians, stored as structure-of-arrays. The
// pair shares all geometric attributes; only the intrinsic color is stored —
// degraded colors are derived per frame and never persisted.
struct GaussianCloud {
    std::vector<float> positions;    // [N*3]
    std::vector<float> log_scales;   // [N*3]
    std::vector<float> rotations;    // [N*4] quaternion (w,x,y,z)
    std::vector<float> opacity_logits;     // [N]
    std::vector<float> intrinsic_color_logits; // [N*3]

    size_t size() const { return opacity_logits.size(); }
    void resize(size_t n) {
        positions.resize(n * 3);
        log_scales.resize(n * 3);
        rotations.resize(n * 4);
        opacity_logits.resize(n);
        intrinsic_color_logits.resize(n * 3);
    }
    Vec3 position(size_t i) const { return {positions[i * 3], positions[i * 3 + 1], positions[i * 3 + 2]}; }
    Vec3 intrinsic_color(size_t i) const {
        return {sigmoidf(intrinsic_color_logits[i * 3]), sigmoidf(intrinsic_color_logits[i * 3 + 1]),
                sigmoidf(intrinsic_color_logits[i * 3 + 2])};
    }
    float opacity(size_t i) const { return sigmoidf(opacity_logits[i]); }
    void renormalize_quaternions();
};

struct SceneBounds {
    Vec3 center{0, 0, 0};
    float extent = 1.0f;
};

SceneBounds compute_bounds(const std::vector<Vec3>& points);

// Euclidean distance between a Gaussian center and the camera center.
float viewpoint_distance(const Vec3& position, const CameraFrame& cam);

// Build Gaussians from a sparse point cloud: colors become intrinsic color
// logits, scale comes from the mean distance to the 3 nearest neighbors
// (padded by repeating the nearest when fewer exist), opacity starts at 0.1.
// Subsamples uniformly at random (seeded) when over `count_limit`.
GaussianCloud init_from_points(const std::vector<Vec3>& points, const std::vector<Vec3>& colors,
                               size_t count_limit, uint64_t seed);

} // namespace uwgs
