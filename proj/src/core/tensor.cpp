// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#include "tensor.hpp"

namespace uwgs {

HostTensor resize_bilinear(const HostTensor& in, int out_h, int out_w) {
    require(in.shape.ndim == 3, "resize_bilinear expects [C,H,W]");
    require(out_h >= 1 && out_w >= 1, "resize target must be positive");
    const int c = in.channels(), h = in.height(), w = in.width();
    HostTensor out(Shape{c, out_h, out_w});
    const float sy = out_h > 1 ? static_cast<float>(h - 1) / (out_h - 1) : 0.0f;
    const float sx = out_w > 1 ? static_cast<float>(w - 1) / (out_w - 1) : 0.0f;
    for (int oy = 0; oy < out_h; ++oy) {
        float fy = oy * sy;
        int y0 = static_cast<int>(fy);
        if (y0 > h - 2) y0 = h >= 2 ? h - 2 : 0;
        float ty = h >= 2 ? fy - y0 : 0.0f;
        int y1 = h >= 2 ? y0 + 1 : y0;
        for (int ox = 0; ox < out_w; ++ox) {
            float fx = ox * sx;
            int x0 = static_cast<int>(fx);
            if (x0 > w - 2) x0 = w >= 2 ? w - 2 : 0;
            float tx = w >= 2 ? fx - x0 : 0.0f;
            int x1 = w >= 2 ? x0 + 1 : x0;
            for (int ch = 0; ch < c; ++ch) {
                float a = in.at(ch, y0, x0) * (1 - tx) + in.at(ch, y0, x1) * tx;
                float b = in.at(ch, y1, x0) * (1 - tx) + in.at(ch, y1, x1) * tx;
                out.at(ch, oy, ox) = a * (1 - ty) + b * ty;
            }
        }
    }
    return out;
}

} // namespace uwgs
