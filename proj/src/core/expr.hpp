// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "tape.hpp"

namespace uwgs {

// Scalar handle onto a tape node of shape [1]. Together with the float
// overloads below it lets the splatting and degradation math be written once
// as templates and instantiated either recorded (training) or plain
// (inference and dataset synthesis).
struct Expr {
    Tape* tape = nullptr;
    Tape::Id id = Tape::kNone;

    Expr() = default;
    Expr(Tape* t, Tape::Id i) : tape(t), id(i) {}
};

inline Expr operator+(Expr a, Expr b) { return {a.tape, a.tape->add(a.id, b.id)}; }
inline Expr operator-(Expr a, Expr b) { return {a.tape, a.tape->sub(a.id, b.id)}; }
inline Expr operator*(Expr a, Expr b) { return {a.tape, a.tape->mul(a.id, b.id)}; }
inline Expr operator/(Expr a, Expr b) { return {a.tape, a.tape->div(a.id, b.id)}; }
inline Expr operator+(Expr a, float c) { return {a.tape, a.tape->add_c(a.id, c)}; }
inline Expr operator+(float c, Expr a) { return a + c; }
inline Expr operator-(Expr a, float c) { return {a.tape, a.tape->add_c(a.id, -c)}; }
inline Expr operator-(float c, Expr a) { return {a.tape, a.tape->rsub_c(a.id, c)}; }
inline Expr operator*(Expr a, float c) { return {a.tape, a.tape->mul_c(a.id, c)}; }
inline Expr operator*(float c, Expr a) { return a * c; }
inline Expr operator/(Expr a, float c) { return {a.tape, a.tape->mul_c(a.id, 1.0f / c)}; }
inline Expr operator-(Expr a) { return a * -1.0f; }

// Pull the float overloads in so unqualified calls work for S = float too.
using std::exp;
using std::log;
using std::sqrt;

inline Expr exp(Expr a) { return {a.tape, a.tape->exp(a.id)}; }
inline Expr sqrt(Expr a) { return {a.tape, a.tape->pow_c(a.id, 0.5f)}; }
inline Expr clamp(Expr a, float lo, float hi) { return {a.tape, a.tape->clamp(a.id, lo, hi)}; }
inline float value_of(Expr a) { return a.tape->scalar(a.id); }

// Float counterparts so `S = float` instantiations compile unchanged.
inline float clamp(float a, float lo, float hi) { return clampf(a, lo, hi); }
inline float value_of(float a) { return a; }

} // namespace uwgs
