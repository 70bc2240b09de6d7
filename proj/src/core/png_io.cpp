// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#include "png_io.hpp"

#include <png.h>
#include <zlib.h>

#include <cstdio>
#include <memory>
#include <vector>

namespace uwgs {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

void write_png(const std::string& path, int width, int height, int color_type, int bit_depth,
               const std::vector<png_bytep>& rows) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open for writing: " + path);
    PngWriter w;
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!w.png) throw IoError("png_create_write_struct failed");
    w.info = png_create_info_struct(w.png);
    if (!w.info) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(w.png))) throw IoError("libpng write error: " + path);
    png_init_io(w.png, fp.get());
    png_set_IHDR(w.png, w.info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    if (bit_depth == 16) png_set_swap(w.png); // rows are little-endian in memory
    png_write_image(w.png, const_cast<png_bytepp>(rows.data()));
    png_write_end(w.png, nullptr);
}

void read_png(const std::string& path, PngReader& r, FilePtr& fp) {
    fp.reset(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open: " + path);
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
        throw IoError("not a PNG file: " + path);
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw IoError("png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(r.png))) throw IoError("libpng read error: " + path);
    png_init_io(r.png, fp.get());
    png_set_sig_bytes(r.png, 8);
    png_read_info(r.png, r.info);
}

} // namespace

void write_png_rgb8(const std::string& path, const HostTensor& image) {
    require(image.shape.ndim == 3 && image.channels() == 3, "write_png_rgb8: image must be [3,H,W]");
    const int h = image.height(), w = image.width();
    std::vector<unsigned char> buf(static_cast<size_t>(h) * w * 3);
    const int64_t hw = static_cast<int64_t>(h) * w;
    for (int64_t i = 0; i < hw; ++i)
        for (int c = 0; c < 3; ++c)
            buf[i * 3 + c] =
                static_cast<unsigned char>(clampf(image.data[c * hw + i], 0.0f, 1.0f) * 255.0f + 0.5f);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<size_t>(y) * w * 3;
    write_png(path, w, h, PNG_COLOR_TYPE_RGB, 8, rows);
}

HostTensor read_png_rgb8(const std::string& path) {
    FilePtr fp;
    PngReader r;
    read_png(path, r, fp);
    if (setjmp(png_jmpbuf(r.png))) throw IoError("libpng read error: " + path);
    png_set_expand(r.png);
    png_set_strip_16(r.png);
    png_set_strip_alpha(r.png);
    png_set_gray_to_rgb(r.png);
    png_read_update_info(r.png, r.info);
    const int w = static_cast<int>(png_get_image_width(r.png, r.info));
    const int h = static_cast<int>(png_get_image_height(r.png, r.info));
    require(png_get_channels(r.png, r.info) == 3, "read_png_rgb8: expected 3 channels after expand");
    std::vector<unsigned char> buf(static_cast<size_t>(h) * w * 3);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    HostTensor out(Shape{3, h, w});
    const int64_t hw = static_cast<int64_t>(h) * w;
    for (int64_t i = 0; i < hw; ++i)
        for (int c = 0; c < 3; ++c) out.data[c * hw + i] = buf[i * 3 + c] / 255.0f;
    return out;
}

void write_png_gray16(const std::string& path, const HostTensor& map) {
    require(map.shape.ndim == 3 && map.channels() == 1, "write_png_gray16: map must be [1,H,W]");
    const int h = map.height(), w = map.width();
    std::vector<uint16_t> buf(static_cast<size_t>(h) * w);
    for (size_t i = 0; i < buf.size(); ++i)
        buf[i] = static_cast<uint16_t>(clampf(map.data[i], 0.0f, 1.0f) * 65535.0f + 0.5f);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = reinterpret_cast<png_bytep>(buf.data() + static_cast<size_t>(y) * w);
    write_png(path, w, h, PNG_COLOR_TYPE_GRAY, 16, rows);
}

HostTensor read_png_gray16(const std::string& path) {
    FilePtr fp;
    PngReader r;
    read_png(path, r, fp);
    if (setjmp(png_jmpbuf(r.png))) throw IoError("libpng read error: " + path);
    require(png_get_color_type(r.png, r.info) == PNG_COLOR_TYPE_GRAY,
            "read_png_gray16: expected grayscale: " + path);
    require(png_get_bit_depth(r.png, r.info) == 16, "read_png_gray16: expected 16-bit: " + path);
    png_set_swap(r.png);
    png_read_update_info(r.png, r.info);
    const int w = static_cast<int>(png_get_image_width(r.png, r.info));
    const int h = static_cast<int>(png_get_image_height(r.png, r.info));
    std::vector<uint16_t> buf(static_cast<size_t>(h) * w);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = reinterpret_cast<png_bytep>(buf.data() + static_cast<size_t>(y) * w);
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    HostTensor out(Shape{1, h, w});
    for (size_t i = 0; i < buf.size(); ++i) out.data[i] = buf[i] / 65535.0f;
    return out;
}

uint32_t file_crc32(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open: " + path);
    uLong crc = crc32(0L, Z_NULL, 0);
    unsigned char buf[65536];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), fp.get())) > 0)
        crc = crc32(crc, buf, static_cast<uInt>(n));
    return static_cast<uint32_t>(crc);
}

} // namespace uwgs
