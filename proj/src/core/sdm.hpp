// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "degradation.hpp"
#include "renderer.hpp"
#include "scene.hpp"
#include "tape.hpp"

namespace uwgs {

// Named learnable tensor; the unit of checkpointing and optimizer state.
struct ParamTensor {
    std::string name;
    Shape shape{1};
    std::vector<float> data;

    ParamTensor() = default;
    ParamTensor(std::string n, Shape s) : name(std::move(n)), shape(s), data(s.numel(), 0.0f) {}
};

struct SdmConfig {
    int net_res = 128;      // fixed network input resolution
    int hash_levels = 16;
    int hash_log2 = 15;     // table rows per level = 2^hash_log2 (paper uses 21)
    float hash_base_res = 16.0f;
    float hash_max_res = 8192.0f;
    int hash_features = 2;
};

// All learnable SDM weights. Tensor order is fixed; checkpoints and the
// optimizer rely on it.
struct SdmParams {
    SdmConfig cfg;
    // Water Parameters Extractor: three DW-conv blocks (6->16->32->64),
    // each pool halves 128 -> 16, then a linear head to 9 raw outputs.
    std::vector<ParamTensor> wpe;
    // Instantaneous brightness encoder: 3->16->16->16 with additive skips,
    // three 2x2 average pools down to the 16x16 feature map F_l.
    std::vector<ParamTensor> ibf;
    // Multi-level hash table, [levels * 2^log2, features].
    std::vector<ParamTensor> hash;
    // Color encoder omega: 3 -> 16 -> 32 MLP.
    std::vector<ParamTensor> omega;
    // Illumination perturbation decoder: 96 -> 64 -> 64 -> 3 MLP.
    std::vector<ParamTensor> decoder;

    std::vector<ParamTensor*> all();
    std::vector<const ParamTensor*> all() const;
};

SdmParams init_sdm(const SdmConfig& cfg, uint64_t seed);

// Leaf ids for one recorded step, mirroring SdmParams tensor order.
struct SdmLeaves {
    std::vector<Tape::Id> wpe, ibf, hash, omega, decoder;
};
SdmLeaves make_sdm_leaves(Tape& t, const SdmParams& p);

// Depth-aware enhancement + channel concat, resized to the network
// resolution: [6,net,net] = concat(pseudo (x) image, image).
HostTensor make_wpe_input(const HostTensor& degraded, const HostTensor& pseudo_depth, int net_res);
HostTensor make_ibf_input(const HostTensor& degraded, int net_res);

struct WaterIds {
    Tape::Id ambient = Tape::kNone;     // [3], sigmoid
    Tape::Id attenuation = Tape::kNone; // [3], softplus + 1e-4
    Tape::Id backscatter = Tape::kNone; // [3], softplus + 1e-4
};

WaterIds predict_water(Tape& t, const SdmLeaves& l, const SdmParams& p, const HostTensor& wpe_input6);

struct BrightnessIds {
    Tape::Id feature_map = Tape::kNone; // F_l [16,16,16]
    Tape::Id global_vec = Tape::kNone;  // f_g [16]
};

BrightnessIds encode_brightness(Tape& t, const SdmLeaves& l, const SdmParams& p,
                                const HostTensor& ibf_input3);

// Multi-level hash encoding of a position. Interpolation weights are computed
// from the current position value; gradients flow into the table entries.
Tape::Id hash_encode(Tape& t, Tape::Id table_leaf, const SdmConfig& cfg, const Vec3& position,
                     const SceneBounds& bounds);

Tape::Id omega_encode(Tape& t, const SdmLeaves& l, Tape::Id color3);

Tape::Id decode_epsilon(Tape& t, const SdmLeaves& l, Tape::Id concat96);

// Per-Gaussian transient perturbation: bilinear-sample F_l at the projected
// center (uv clamped for off-screen Gaussians), concat with f_g, hash and
// color embeddings, decode.
Tape::Id predict_epsilon(Tape& t, const SdmLeaves& l, const SdmParams& p, const BrightnessIds& br,
                         Expr mean_x, Expr mean_y, const CameraFrame& cam, const Vec3& position,
                         const SceneBounds& bounds, Tape::Id color3);

struct SdmFlags {
    bool use_sd = true;  // false: identity water (SD term skipped entirely)
    bool use_td = true;  // false: epsilon = 0
    bool detach_sd = false;
    bool detach_td = false;
};

struct FrameForward {
    std::vector<Splat2D<Expr>> splats;      // visible Gaussians with degraded colors
    std::vector<Tape::Id> epsilons;         // [3] per visible Gaussian (empty if TD off)
    std::vector<int> gaussian_index;        // cloud index per splat
    WaterIds water;                         // invalid ids when SD off
};

// Per-Gaussian leaf ids for the cloud tensors.
struct CloudLeaves {
    Tape::Id positions, log_scales, rotations, opacity_logits, color_logits;
};
CloudLeaves make_cloud_leaves(Tape& t, const GaussianCloud& cloud);

// Derives degraded per-Gaussian colors via the color degradation equation and
// projects every pair for rendering. Water and brightness inputs must be at
// the network resolution.
FrameForward sdm_frame_forward(Tape& t, const CloudLeaves& cl, size_t n_gaussians,
                               const SdmLeaves& sl, const SdmParams& p, const CameraFrame& cam,
                               const HostTensor& wpe_input6, const HostTensor& ibf_input3,
                               const SceneBounds& bounds, const SdmFlags& flags,
                               const GaussianCloud& cloud_values);

// Forward-only convenience used at checkpoint time and by the CLI: water
// parameters for one frame as plain floats.
WaterParams predict_water_values(const SdmParams& p, const HostTensor& degraded,
                                 const HostTensor& pseudo_depth);

} // namespace uwgs
