// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "degradation.hpp"
#include "scene.hpp"

namespace uwgs {

enum class SceneLayout { TexturedWall, TerracedBoxes, ColorGrid };

SceneLayout layout_from_string(const std::string& s);
std::string layout_to_string(SceneLayout l);

// Procedural ground-truth scene + trajectory + degradation configuration.
struct SyntheticSceneSpec {
    std::string name = "toy";
    SceneLayout layout = SceneLayout::TexturedWall;
    int gaussian_count = 200;
    int frames = 40;
    int width = 128, height = 96;
    uint64_t seed = 7;
    WaterParams water;
    CausticConfig caustic;       // amplitude 0 disables temporal degradation
    bool caustics_enabled = true;
    float pseudo_depth_noise = 0.05f; // lognormal sigma; 0 disables
};

SyntheticSceneSpec load_scene_spec(const std::string& json_path);

struct SynthScene {
    GaussianCloud gaussians; // ground truth
    std::vector<CameraFrame> cameras;
};

// Deterministic scene + forward-facing arc trajectory; geometry is rescaled
// so the maximum camera-to-Gaussian distance is ~1 scene unit.
SynthScene synth_scene(const SyntheticSceneSpec& spec);

struct FrameRecord {
    int t = 0;
    std::string name;
    std::string degraded_path, clean_path, depth_path, pseudo_depth_path;
    float depth_scale = 1.0f; // stored 16-bit depth * scale = camera z
    bool is_test = false;
    CameraFrame camera; // pose/intrinsics only (images not loaded)
    uint32_t crc_degraded = 0, crc_clean = 0, crc_depth = 0, crc_pseudo = 0;
};

struct DatasetManifest {
    std::string name;
    int width = 0, height = 0;
    uint64_t seed = 0;
    std::optional<WaterParams> water;        // ground truth when synthetic
    std::optional<CausticConfig> caustic;
    std::vector<FrameRecord> frames;
};

// Renders the ground-truth scene, applies caustics then water, and writes
// the on-disk layout: images_degraded/, images_clean/, depth/, pseudo_depth/,
// sparse/0/ (COLMAP text) and manifest.json with CRC32 checksums.
DatasetManifest generate_dataset(const SyntheticSceneSpec& spec, const std::string& out_dir,
                                 int threads = 1);

struct LoadedFrame {
    CameraFrame camera;  // with degraded image + pseudo-depth loaded
    HostTensor clean;    // [3,H,W]; empty when the dataset has no ground truth
    HostTensor depth;    // [1,H,W] camera z in scene units; empty when absent
    bool is_test = false;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<LoadedFrame> frames;
    std::string dir;

    std::vector<const LoadedFrame*> split(bool test) const {
        std::vector<const LoadedFrame*> v;
        for (const LoadedFrame& f : frames)
            if (f.is_test == test) v.push_back(&f);
        return v;
    }
};

// Loads a generated dataset, verifying checksums and the train/test split
// (every 8th frame is a test frame).
Dataset load_dataset(const std::string& dir);

DatasetManifest read_manifest(const std::string& dir);

} // namespace uwgs
