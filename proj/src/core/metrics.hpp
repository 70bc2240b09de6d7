// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "datasets.hpp"
#include "tensor.hpp"

namespace uwgs {

// -10 log10(MSE), capped at 99 dB for identical images.
float psnr(const HostTensor& a, const HostTensor& b);

// Forward evaluation of the loss module's SSIM graph (single implementation).
float ssim_value(const HostTensor& a, const HostTensor& b);

// Full CIEDE2000 with kL = kC = kH = 1.
float ciede2000(float l1, float a1, float b1, float l2, float a2, float b2);

// sRGB in [0,1] -> CIE L*a*b* (D65).
void srgb_to_lab(float r, float g, float b, float& L, float& A, float& B);

// Mean CIEDE2000 over pixels of two RGB images.
float mean_ciede2000(const HostTensor& a, const HostTensor& b);

// Mean per-pixel RGB vector angle in degrees; pixels black in both images
// contribute zero.
float angular_error_deg(const HostTensor& a, const HostTensor& b);

// Pearson correlation over flattened maps.
float pearson(const HostTensor& a, const HostTensor& b);

enum class EvalMode { Intrinsic, DegradedWithWater };

struct FrameEval {
    int t = 0;
    float psnr = 0, ssim = 0, de00 = 0, psi_deg = 0;
};

struct EvalReport {
    std::string scene;
    std::string mode;
    int checkpoint_step = 0;
    std::vector<FrameEval> frames; // test split
    float mean_psnr = 0, mean_ssim = 0, mean_de00 = 0, mean_psi = 0;
};

// Renders every test view in the requested mode and compares: intrinsic
// renders against clean ground truth, degraded renders (SD term with the
// checkpoint's per-frame water, epsilon = 0) against the degraded inputs.
EvalReport evaluate(const Checkpoint& ckpt, const Dataset& ds, EvalMode mode,
                    const std::string& panel_dir = "");

void write_report_json(const EvalReport& report, const std::string& path);

} // namespace uwgs
