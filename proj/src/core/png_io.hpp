// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "tensor.hpp"

namespace uwgs {

// 8-bit RGB. Values are clamped to [0,1] and quantized with round-to-nearest.
void write_png_rgb8(const std::string& path, const HostTensor& image);
HostTensor read_png_rgb8(const std::string& path); // -> [3,H,W] in [0,1]

// 16-bit grayscale. Values are clamped to [0,1] and scaled by 65535.
void write_png_gray16(const std::string& path, const HostTensor& map);
HostTensor read_png_gray16(const std::string& path); // -> [1,H,W] in [0,1]

// zlib CRC32 of a file's bytes; used for manifest checksums.
uint32_t file_crc32(const std::string& path);

} // namespace uwgs
