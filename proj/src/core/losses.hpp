// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "tape.hpp"

namespace uwgs {

struct LossWeights {
    float lambda1 = 0.8f;     // L1 term
    float lambda2 = 0.2f;     // D-SSIM term
    float lambda_cds = 0.1f;  // coarse depth supervision
    float lambda_ads = 0.01f; // adaptive edge-aware smoothness
    float lambda_eps = 100.0f; // transient regularization
};

// SSIM with an 11x11 Gaussian window (sigma 1.5, C1=0.01^2, C2=0.03^2),
// per channel then averaged. Boundary windows are renormalized by the
// in-image weight mass, so constant images score exactly by the luminance
// term everywhere. This is the single SSIM implementation; the metrics
// module evaluates the same graph forward-only.
Tape::Id ssim(Tape& t, Tape::Id a, Tape::Id b);

// lambda1 * mean|a-b| + lambda2 * (1 - SSIM)/2.
Tape::Id photometric_loss(Tape& t, Tape::Id rendered, Tape::Id observed, const LossWeights& w);

// 1 - Pearson(a, b) over flattened maps, with 1e-8 floors on both stds.
Tape::Id pearson_depth_loss(Tape& t, Tape::Id pseudo, Tape::Id rendered_depth);

// Forward differences of the rendered depth, weighted by gradient-stopped
// factors from the pseudo-depth and observed image; normalized by H*W.
Tape::Id edge_aware_smoothness(Tape& t, Tape::Id rendered_depth, const HostTensor& pseudo,
                               const HostTensor& observed);

// Sum of squared transient perturbations of the frame's visible Gaussians.
Tape::Id epsilon_reg(Tape& t, std::span<const Tape::Id> epsilons);

struct TotalLoss {
    Tape::Id total = Tape::kNone;
    Tape::Id photo = Tape::kNone;
    Tape::Id cds = Tape::kNone;
    Tape::Id ads = Tape::kNone;
    Tape::Id eps_reg = Tape::kNone;
};

// total = photo + lambda_cds*cds + lambda_ads*ads + lambda_eps*eps_reg.
// Pass kNone to drop a term (ablations).
TotalLoss total_loss(Tape& t, Tape::Id photo, Tape::Id cds, Tape::Id ads, Tape::Id eps,
                     const LossWeights& w);

} // namespace uwgs
