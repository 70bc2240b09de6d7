// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "common.hpp"

namespace uwgs {

// Row-major shape with up to 3 dimensions ([n], [m,n] or [C,H,W]).
struct Shape {
    std::array<int32_t, 3> d{1, 1, 1};
    int32_t ndim = 1;

    Shape() = default;
    Shape(std::initializer_list<int32_t> dims) {
        require(dims.size() >= 1 && dims.size() <= 3, "shape must have 1 to 3 dims");
        ndim = static_cast<int32_t>(dims.size());
        int i = 0;
        for (int32_t v : dims) d[i++] = v;
        for (; i < 3; ++i) d[i] = 1;
    }

    int64_t numel() const {
        int64_t n = 1;
        for (int i = 0; i < ndim; ++i) n *= d[i];
        return n;
    }
    bool operator==(const Shape& o) const { return ndim == o.ndim && d == o.d; }
};

// Plain host buffer for non-differentiable data (images, depth maps, fixtures).
struct HostTensor {
    Shape shape;
    std::vector<float> data;

    HostTensor() = default;
    explicit HostTensor(Shape s, float fill = 0.0f) : shape(s), data(static_cast<size_t>(s.numel()), fill) {}

    float& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * shape.d[1] + y) * shape.d[2] + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * shape.d[1] + y) * shape.d[2] + x];
    }
    int channels() const { return shape.d[0]; }
    int height() const { return shape.d[1]; }
    int width() const { return shape.d[2]; }
    bool all_finite() const {
        for (float v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline float logitf(float p) {
    return std::log(p / (1.0f - p));
}

inline float sigmoidf(float x) {
    return x >= 0 ? 1.0f / (1.0f + std::exp(-x)) : std::exp(x) / (1.0f + std::exp(x));
}

inline float clampf(float v, float lo, float hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

// Bilinear resize of a [C,H,W] tensor; uses the texel-center convention
// (output position 0 maps to input texel 0, output position H'-1 to H-1).
HostTensor resize_bilinear(const HostTensor& in, int out_h, int out_w);

} // namespace uwgs
