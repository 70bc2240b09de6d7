// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace uwgs {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// PCG32: small deterministic generator, identical streams on every platform.
class Pcg32 {
public:
    explicit Pcg32(uint64_t seed = 0x853c49e6748fea9bull, uint64_t stream = 0xda3e39cb94b95bdbull) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ull + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    // Uniform in [0,1).
    float next_float() { return static_cast<float>(next_u32() >> 8) * (1.0f / 16777216.0f); }

    float uniform(float lo, float hi) { return lo + (hi - lo) * next_float(); }

    // Box-Muller; one value per call, deterministic.
    float normal() {
        float u1 = next_float();
        float u2 = next_float();
        if (u1 < 1e-12f) u1 = 1e-12f;
        return std::sqrt(-2.0f * std::log(u1)) * std::cos(6.2831853071795864f * u2);
    }

    uint32_t bounded(uint32_t n) {
        // Lemire-style rejection-free enough for our use; keep it exact via modulo
        // of a 64-bit product to avoid bias.
        return static_cast<uint32_t>((static_cast<uint64_t>(next_u32()) * n) >> 32);
    }

private:
    uint64_t state_;
    uint64_t inc_;
};

// Hash a lattice point to [0,1); used by the procedural caustics field.
inline float lattice_hash01(int64_t ix, int64_t iy, uint64_t seed) {
    uint64_t h = splitmix64(static_cast<uint64_t>(ix) * 0x9e3779b97f4a7c15ull ^
                            splitmix64(static_cast<uint64_t>(iy) + seed));
    return static_cast<float>(h >> 40) * (1.0f / 16777216.0f);
}

} // namespace uwgs
