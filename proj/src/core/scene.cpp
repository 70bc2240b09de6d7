// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#include "scene.hpp"

#include <algorithm>
#include <numeric>

#include "rng.hpp"

namespace uwgs {

Vec4 quat_normalize(const Vec4& q) {
    float n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (n < 1e-12f) return {1, 0, 0, 0};
    return {q[0] / n, q[1] / n, q[2] / n, q[3] / n};
}

Mat3 quat_to_mat3(const Vec4& q) {
    const float w = q[0], x = q[1], y = q[2], z = q[3];
    return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
            2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
            2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
}

void GaussianCloud::renormalize_quaternions() {
    for (size_t i = 0; i < size(); ++i) {
        Vec4 q{rotations[i * 4], rotations[i * 4 + 1], rotations[i * 4 + 2], rotations[i * 4 + 3]};
        q = quat_normalize(q);
        for (int k = 0; k < 4; ++k) rotations[i * 4 + k] = q[k];
    }
}

SceneBounds compute_bounds(const std::vector<Vec3>& points) {
    require(!points.empty(), "compute_bounds: empty point list");
    SceneBounds b;
    for (const Vec3& p : points)
        for (int k = 0; k < 3; ++k) b.center[k] += p[k];
    for (int k = 0; k < 3; ++k) b.center[k] /= static_cast<float>(points.size());
    float ext = 0;
    for (const Vec3& p : points) {
        float d2 = 0;
        for (int k = 0; k < 3; ++k) d2 += (p[k] - b.center[k]) * (p[k] - b.center[k]);
        ext = std::max(ext, std::sqrt(d2));
    }
    b.extent = std::max(ext, 1e-6f);
    return b;
}

float viewpoint_distance(const Vec3& position, const CameraFrame& cam) {
    const Vec3 c = cam.center();
    const float dx = position[0] - c[0], dy = position[1] - c[1], dz = position[2] - c[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

GaussianCloud init_from_points(const std::vector<Vec3>& points, const std::vector<Vec3>& colors,
                               size_t count_limit, uint64_t seed) {
    require(!points.empty(), "init_from_points: empty point list");
    require(points.size() == colors.size(), "init_from_points: point/color count mismatch");
    require(count_limit >= 1, "init_from_points: count_limit must be >= 1");

    std::vector<size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    if (points.size() > count_limit) {
        Pcg32 rng(seed, 0x1234);
        // Fisher-Yates prefix shuffle, then keep the first count_limit.
        for (size_t i = 0; i < count_limit; ++i) {
            size_t j = i + rng.bounded(static_cast<uint32_t>(order.size() - i));
            std::swap(order[i], order[j]);
        }
        order.resize(count_limit);
        std::sort(order.begin(), order.end()); // keep stable spatial ordering
    }

    const size_t n = order.size();
    GaussianCloud g;
    g.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const Vec3& p = points[order[i]];
        const Vec3& c = colors[order[i]];
        for (int k = 0; k < 3; ++k) {
            g.positions[i * 3 + k] = p[k];
            g.intrinsic_color_logits[i * 3 + k] = logitf(clampf(c[k], 0.001f, 0.999f));
        }
        g.rotations[i * 4] = 1; // identity
        g.rotations[i * 4 + 1] = g.rotations[i * 4 + 2] = g.rotations[i * 4 + 3] = 0;
        g.opacity_logits[i] = logitf(0.1f);
    }

    // Isotropic initial scale: log mean distance to the 3 nearest neighbors,
    // padding with the nearest distance when fewer than 3 exist.
    for (size_t i = 0; i < n; ++i) {
        float best[3] = {1e30f, 1e30f, 1e30f};
        int found = 0;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            float d2 = 0;
            for (int k = 0; k < 3; ++k) {
                float d = g.positions[i * 3 + k] - g.positions[j * 3 + k];
                d2 += d * d;
            }
            float d = std::sqrt(d2);
            if (d < best[0]) {
                best[2] = best[1];
                best[1] = best[0];
                best[0] = d;
            } else if (d < best[1]) {
                best[2] = best[1];
                best[1] = d;
            } else if (d < best[2]) {
                best[2] = d;
            }
            ++found;
        }
        float mean;
        if (found == 0) {
            mean = 0.01f;
        } else {
            int real = std::min(found, 3);
            float acc = 0;
            for (int k = 0; k < real; ++k) acc += best[k];
            acc += best[0] * static_cast<float>(3 - real);
            mean = acc / 3.0f;
        }
        const float ls = std::log(std::max(mean, 1e-6f));
        for (int k = 0; k < 3; ++k) g.log_scales[i * 3 + k] = ls;
    }
    return g;
}

} // namespace uwgs
