// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "scene.hpp"

namespace uwgs {

struct ColmapScene {
    std::vector<CameraFrame> cameras; // pose/intrinsics stubs, ordered by image name, t assigned
    std::vector<Vec3> points;
    std::vector<Vec3> point_colors; // in [0,1]
};

// Reads cameras.txt / images.txt / points3D.txt from `dir`. Only PINHOLE and
// SIMPLE_PINHOLE camera models are accepted. Malformed input raises ParseError
// with the offending file and line number.
ColmapScene load_colmap(const std::string& dir);

// Writes the same three-file text layout (poses, one shared pinhole camera
// per distinct intrinsics, points with 8-bit colors).
void save_colmap(const std::string& dir, const std::vector<CameraFrame>& cameras,
                 const std::vector<Vec3>& points, const std::vector<Vec3>& colors);

} // namespace uwgs
