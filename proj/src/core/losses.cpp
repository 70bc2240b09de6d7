// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#include "losses.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace uwgs {

namespace {

std::array<float, 11> gaussian_window11() {
    std::array<float, 11> w;
    float s = 0;
    for (int i = 0; i < 11; ++i) {
        const float d = static_cast<float>(i - 5);
        w[i] = std::exp(-d * d / (2.0f * 1.5f * 1.5f));
        s += w[i];
    }
    for (float& v : w) v /= s;
    return w;
}

// Separable 11x11 Gaussian blur as two depthwise convolutions with constant
// kernels (zero padding; the caller divides by the weight-mass map).
Tape::Id blur(Tape& t, Tape::Id x) {
    const Shape& s = t.shape(x);
    const int C = s.d[0];
    const auto w = gaussian_window11();
    std::vector<float> krow(static_cast<size_t>(C) * 11), kcol(static_cast<size_t>(C) * 11);
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < 11; ++i) {
            krow[c * 11 + i] = w[i];
            kcol[c * 11 + i] = w[i];
        }
    Tape::Id kr = t.constant(krow, Shape{C, 1, 11});
    Tape::Id kc = t.constant(kcol, Shape{C, 11, 1});
    return t.dw_conv(t.dw_conv(x, kr), kc);
}

} // namespace

Tape::Id ssim(Tape& t, Tape::Id a, Tape::Id b) {
    const Shape& s = t.shape(a);
    require(s == t.shape(b), "ssim: shape mismatch");
    require(s.ndim == 3, "ssim: inputs must be [C,H,W]");
    constexpr float C1 = 0.01f * 0.01f;
    constexpr float C2 = 0.03f * 0.03f;

    // In-image window mass for boundary renormalization.
    HostTensor ones(Shape{s.d[0], s.d[1], s.d[2]}, 1.0f);
    Tape::Id mass = blur(t, t.constant(ones.data, ones.shape));

    Tape::Id mu_a = t.div(blur(t, a), mass);
    Tape::Id mu_b = t.div(blur(t, b), mass);
    Tape::Id mu_aa = t.mul(mu_a, mu_a);
    Tape::Id mu_bb = t.mul(mu_b, mu_b);
    Tape::Id mu_ab = t.mul(mu_a, mu_b);
    Tape::Id var_a = t.sub(t.div(blur(t, t.mul(a, a)), mass), mu_aa);
    Tape::Id var_b = t.sub(t.div(blur(t, t.mul(b, b)), mass), mu_bb);
    Tape::Id cov = t.sub(t.div(blur(t, t.mul(a, b)), mass), mu_ab);

    Tape::Id num = t.mul(t.add_c(t.mul_c(mu_ab, 2.0f), C1), t.add_c(t.mul_c(cov, 2.0f), C2));
    Tape::Id den = t.mul(t.add_c(t.add(mu_aa, mu_bb), C1), t.add_c(t.add(var_a, var_b), C2));
    return t.mean(t.div(num, den));
}

Tape::Id photometric_loss(Tape& t, Tape::Id rendered, Tape::Id observed, const LossWeights& w) {
    require(t.shape(rendered) == t.shape(observed), "photometric_loss: shape mismatch");
    Tape::Id l1 = t.mean(t.abs(t.sub(rendered, observed)));
    Tape::Id dssim = t.mul_c(t.rsub_c(ssim(t, rendered, observed), 1.0f), 0.5f);
    return t.add(t.mul_c(l1, w.lambda1), t.mul_c(dssim, w.lambda2));
}

Tape::Id pearson_depth_loss(Tape& t, Tape::Id pseudo, Tape::Id rendered_depth) {
    require(t.shape(pseudo).numel() == t.shape(rendered_depth).numel(),
            "pearson_depth_loss: size mismatch");
    require(t.shape(pseudo).numel() >= 2, "pearson_depth_loss: needs at least 2 pixels");
    Tape::Id da = t.sub(pseudo, t.mean(pseudo));
    Tape::Id db = t.sub(rendered_depth, t.mean(rendered_depth));
    Tape::Id cov = t.mean(t.mul(da, db));
    Tape::Id sa = t.add_c(t.pow_c(t.mean(t.mul(da, da)), 0.5f), 1e-8f);
    Tape::Id sb = t.add_c(t.pow_c(t.mean(t.mul(db, db)), 0.5f), 1e-8f);
    return t.rsub_c(t.div(cov, t.mul(sa, sb)), 1.0f);
}

Tape::Id edge_aware_smoothness(Tape& t, Tape::Id rendered_depth, const HostTensor& pseudo,
                               const HostTensor& observed) {
    const Shape& s = t.shape(rendered_depth);
    require(s.ndim == 3 && s.d[0] == 1, "edge_aware_smoothness: depth must be [1,H,W]");
    const int H = s.d[1], W = s.d[2];
    require(H >= 2 && W >= 2, "edge_aware_smoothness: needs H,W >= 2");
    require(pseudo.height() == H && pseudo.width() == W, "edge_aware_smoothness: pseudo shape");
    require(observed.height() == H && observed.width() == W, "edge_aware_smoothness: image shape");

    // Weights are constants: w = (1-Dhat) exp(-|grad Dhat|) + Dhat exp(-|grad I|),
    // evaluated at the left/top pixel of each forward difference.
    HostTensor wx(Shape{1, H, W - 1}), wy(Shape{1, H - 1, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x + 1 < W; ++x) {
            const float dhat = pseudo.at(0, y, x);
            const float gd = std::fabs(pseudo.at(0, y, x + 1) - dhat);
            float gi = 0;
            for (int c = 0; c < 3; ++c) gi += std::fabs(observed.at(c, y, x + 1) - observed.at(c, y, x));
            gi /= 3.0f;
            wx.at(0, y, x) = (1.0f - dhat) * std::exp(-gd) + dhat * std::exp(-gi);
        }
    for (int y = 0; y + 1 < H; ++y)
        for (int x = 0; x < W; ++x) {
            const float dhat = pseudo.at(0, y, x);
            const float gd = std::fabs(pseudo.at(0, y + 1, x) - dhat);
            float gi = 0;
            for (int c = 0; c < 3; ++c) gi += std::fabs(observed.at(c, y + 1, x) - observed.at(c, y, x));
            gi /= 3.0f;
            wy.at(0, y, x) = (1.0f - dhat) * std::exp(-gd) + dhat * std::exp(-gi);
        }

    Tape::Id lx = t.sum(t.abs(t.mul(t.diff_x(rendered_depth), t.constant(wx.data, wx.shape))));
    Tape::Id ly = t.sum(t.abs(t.mul(t.diff_y(rendered_depth), t.constant(wy.data, wy.shape))));
    return t.mul_c(t.add(lx, ly), 1.0f / static_cast<float>(H * W));
}

Tape::Id epsilon_reg(Tape& t, std::span<const Tape::Id> epsilons) {
    if (epsilons.empty()) return t.constant_scalar(0.0f);
    Tape::Id all = t.concat(epsilons, Shape{static_cast<int32_t>(epsilons.size()) * 3});
    return t.sum(t.mul(all, all));
}

TotalLoss total_loss(Tape& t, Tape::Id photo, Tape::Id cds, Tape::Id ads, Tape::Id eps,
                     const LossWeights& w) {
    TotalLoss out;
    out.photo = photo;
    out.cds = cds;
    out.ads = ads;
    out.eps_reg = eps;
    Tape::Id total = photo != Tape::kNone ? photo : t.constant_scalar(0.0f);
    if (cds != Tape::kNone) total = t.add(total, t.mul_c(cds, w.lambda_cds));
    if (ads != Tape::kNone) total = t.add(total, t.mul_c(ads, w.lambda_ads));
    if (eps != Tape::kNone) total = t.add(total, t.mul_c(eps, w.lambda_eps));
    out.total = total;
    return out;
}

} // namespace uwgs
