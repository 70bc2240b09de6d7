// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#include "tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace uwgs {

namespace {

inline float safe_exp(float x) { return std::exp(std::min(x, 80.0f)); }

inline float stable_sigmoid(float x) {
    return x >= 0 ? 1.0f / (1.0f + safe_exp(-x)) : safe_exp(x) / (1.0f + safe_exp(x));
}

inline float stable_softplus(float x) {
    if (x > 20.0f) return x;
    if (x < -20.0f) return safe_exp(x);
    return std::log1p(std::exp(x));
}

} // namespace

void Tape::reset() {
    nodes_.clear();
    vals_.clear();
    grads_.clear();
    aux_.clear();
    shapes_.clear();
    scalar_shape_ = -1;
    last_shape_ = -1;
    grads_valid_ = false;
}

int32_t Tape::intern_shape(const Shape& s) {
    // The renderer records millions of scalar nodes; keep interning O(1) for them.
    if (s.numel() == 1 && s.ndim == 1) {
        if (scalar_shape_ < 0) {
            shapes_.push_back(s);
            scalar_shape_ = static_cast<int32_t>(shapes_.size() - 1);
        }
        return scalar_shape_;
    }
    if (last_shape_ >= 0 && shapes_[last_shape_] == s) return last_shape_;
    for (size_t i = 0; i < shapes_.size(); ++i)
        if (shapes_[i] == s) {
            last_shape_ = static_cast<int32_t>(i);
            return last_shape_;
        }
    shapes_.push_back(s);
    last_shape_ = static_cast<int32_t>(shapes_.size() - 1);
    return last_shape_;
}

Tape::Id Tape::push(Op op, Id in0, Id in1, const Shape& s, float a0, float a1, int32_t aux) {
    Node n;
    n.op = op;
    n.in0 = in0;
    n.in1 = in1;
    n.shape = intern_shape(s);
    require(vals_.size() + static_cast<size_t>(s.numel()) < size_t(INT32_MAX),
            "tape arena limit exceeded");
    n.val = static_cast<int32_t>(vals_.size());
    n.a0 = a0;
    n.a1 = a1;
    n.aux = aux;
    vals_.resize(vals_.size() + static_cast<size_t>(s.numel()), 0.0f);
    nodes_.push_back(n);
    grads_valid_ = false;
    if (op != Op::Leaf && op != Op::Constant) forward_node(nodes_.back());
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::leaf(std::span<const float> data, Shape s) {
    require(static_cast<int64_t>(data.size()) == s.numel(), "leaf: data size != shape numel");
    Id id = push(Op::Leaf, kNone, kNone, s);
    std::memcpy(valp(nodes_[id]), data.data(), data.size() * sizeof(float));
    return id;
}

Tape::Id Tape::constant(std::span<const float> data, Shape s) {
    require(static_cast<int64_t>(data.size()) == s.numel(), "constant: data size != shape numel");
    Id id = push(Op::Constant, kNone, kNone, s);
    std::memcpy(valp(nodes_[id]), data.data(), data.size() * sizeof(float));
    return id;
}

Tape::Id Tape::constant_scalar(float v) {
    return constant(std::span<const float>(&v, 1), Shape{1});
}

std::span<const float> Tape::val(Id id) const {
    const Node& n = nodes_[id];
    return {vals_.data() + n.val, static_cast<size_t>(nelem(n))};
}

std::span<const float> Tape::grad(Id id) const {
    require(grads_valid_, "grad() before backward()");
    const Node& n = nodes_[id];
    return {grads_.data() + n.val, static_cast<size_t>(nelem(n))};
}

// ---- op constructors -------------------------------------------------------

static bool broadcast_ok(const Shape& a, const Shape& b) {
    return a == b || a.numel() == 1 || b.numel() == 1;
}

Tape::Id Tape::add(Id a, Id b) {
    require(broadcast_ok(shape(a), shape(b)), "add: shape mismatch");
    return push(Op::Add, a, b, shape(a).numel() >= shape(b).numel() ? shape(a) : shape(b));
}
Tape::Id Tape::sub(Id a, Id b) {
    require(broadcast_ok(shape(a), shape(b)), "sub: shape mismatch");
    return push(Op::Sub, a, b, shape(a).numel() >= shape(b).numel() ? shape(a) : shape(b));
}
Tape::Id Tape::mul(Id a, Id b) {
    require(broadcast_ok(shape(a), shape(b)), "mul: shape mismatch");
    return push(Op::Mul, a, b, shape(a).numel() >= shape(b).numel() ? shape(a) : shape(b));
}
Tape::Id Tape::div(Id a, Id b) {
    require(broadcast_ok(shape(a), shape(b)), "div: shape mismatch");
    return push(Op::Div, a, b, shape(a).numel() >= shape(b).numel() ? shape(a) : shape(b));
}
Tape::Id Tape::add_c(Id a, float c) { return push(Op::AddC, a, kNone, shape(a), c); }
Tape::Id Tape::mul_c(Id a, float c) { return push(Op::MulC, a, kNone, shape(a), c); }
Tape::Id Tape::rsub_c(Id a, float c) { return push(Op::RsubC, a, kNone, shape(a), c); }
Tape::Id Tape::pow_c(Id a, float p) { return push(Op::PowC, a, kNone, shape(a), p); }
Tape::Id Tape::exp(Id a) { return push(Op::Exp, a, kNone, shape(a)); }
Tape::Id Tape::log(Id a) { return push(Op::Log, a, kNone, shape(a)); }
Tape::Id Tape::relu(Id a) { return push(Op::Relu, a, kNone, shape(a)); }
Tape::Id Tape::sigmoid(Id a) { return push(Op::Sigmoid, a, kNone, shape(a)); }
Tape::Id Tape::tanh(Id a) { return push(Op::Tanh, a, kNone, shape(a)); }
Tape::Id Tape::softplus(Id a) { return push(Op::Softplus, a, kNone, shape(a)); }
Tape::Id Tape::clamp(Id a, float lo, float hi) { return push(Op::Clamp, a, kNone, shape(a), lo, hi); }

Tape::Id Tape::matmul(Id a, Id b) {
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    require(sa.ndim == 2, "matmul: lhs must be 2-d");
    if (sb.ndim == 1) {
        require(sa.d[1] == sb.d[0], "matmul: inner dims differ");
        return push(Op::Matmul, a, b, Shape{sa.d[0]});
    }
    require(sb.ndim == 2 && sa.d[1] == sb.d[0], "matmul: inner dims differ");
    return push(Op::Matmul, a, b, Shape{sa.d[0], sb.d[1]});
}

Tape::Id Tape::add_chan(Id a, Id bias) {
    require(shape(a).ndim == 3, "add_chan: input must be [C,H,W]");
    require(shape(bias).numel() == shape(a).d[0], "add_chan: bias length != channels");
    return push(Op::AddChan, a, bias, shape(a));
}

Tape::Id Tape::dw_conv(Id input, Id kernels) {
    const Shape& si = shape(input);
    const Shape& sk = shape(kernels);
    require(si.ndim == 3 && sk.ndim == 3, "dw_conv: expects [C,H,W] and [C,kh,kw]");
    require(si.d[0] == sk.d[0], "dw_conv: channel mismatch between input and kernels");
    require(sk.d[1] % 2 == 1 && sk.d[2] % 2 == 1, "dw_conv: kernel dims must be odd");
    return push(Op::DwConv, input, kernels, si);
}

Tape::Id Tape::pw_conv(Id input, Id kernels) {
    const Shape& si = shape(input);
    const Shape& sk = shape(kernels);
    require(si.ndim == 3 && sk.ndim == 2, "pw_conv: expects [C,H,W] and [C2,C]");
    require(sk.d[1] == si.d[0], "pw_conv: channel mismatch between input and kernels");
    return push(Op::PwConv, input, kernels, Shape{sk.d[0], si.d[1], si.d[2]});
}

Tape::Id Tape::avg_pool2(Id a) {
    const Shape& s = shape(a);
    require(s.ndim == 3 && s.d[1] % 2 == 0 && s.d[2] % 2 == 0, "avg_pool2: needs even [C,H,W]");
    return push(Op::AvgPool2, a, kNone, Shape{s.d[0], s.d[1] / 2, s.d[2] / 2});
}

Tape::Id Tape::gap(Id a) {
    const Shape& s = shape(a);
    require(s.ndim == 3, "gap: input must be [C,H,W]");
    return push(Op::Gap, a, kNone, Shape{s.d[0]});
}

Tape::Id Tape::bilinear(Id featmap, Id uv) {
    const Shape& s = shape(featmap);
    require(s.ndim == 3, "bilinear: featmap must be [C,h,w]");
    require(shape(uv).numel() == 2, "bilinear: uv must have 2 elements");
    return push(Op::Bilinear, featmap, uv, Shape{s.d[0]});
}

Tape::Id Tape::sum(Id a) { return push(Op::Sum, a, kNone, Shape{1}); }
Tape::Id Tape::mean(Id a) { return push(Op::Mean, a, kNone, Shape{1}); }

Tape::Id Tape::slice(Id a, int64_t offset, int64_t len) {
    require(offset >= 0 && len >= 1 && offset + len <= shape(a).numel(), "slice: out of range");
    int32_t aux = static_cast<int32_t>(aux_.size());
    aux_.push_back(static_cast<int32_t>(offset));
    return push(Op::Slice, a, kNone, Shape{static_cast<int32_t>(len)}, 0, 0, aux);
}

Tape::Id Tape::concat(std::span<const Id> parts, Shape out_shape) {
    require(!parts.empty(), "concat: no inputs");
    int64_t total = 0;
    for (Id p : parts) total += shape(p).numel();
    require(total == out_shape.numel(), "concat: output shape numel mismatch");
    int32_t aux = static_cast<int32_t>(aux_.size());
    aux_.push_back(static_cast<int32_t>(parts.size()));
    for (Id p : parts) aux_.push_back(p);
    return push(Op::ConcatN, kNone, kNone, out_shape, 0, 0, aux);
}

Tape::Id Tape::diff_x(Id a) {
    const Shape& s = shape(a);
    require(s.ndim == 3 && s.d[2] >= 2, "diff_x: needs [C,H,W>=2]");
    return push(Op::DiffX, a, kNone, Shape{s.d[0], s.d[1], s.d[2] - 1});
}

Tape::Id Tape::diff_y(Id a) {
    const Shape& s = shape(a);
    require(s.ndim == 3 && s.d[1] >= 2, "diff_y: needs [C,H>=2,W]");
    return push(Op::DiffY, a, kNone, Shape{s.d[0], s.d[1] - 1, s.d[2]});
}

Tape::Id Tape::hash_gather(Id table, const int32_t idx[8], const float w[8]) {
    const Shape& s = shape(table);
    require(s.ndim == 2, "hash_gather: table must be [R,F]");
    for (int k = 0; k < 8; ++k) require(idx[k] >= 0 && idx[k] < s.d[0], "hash_gather: index out of range");
    int32_t aux = static_cast<int32_t>(aux_.size());
    for (int k = 0; k < 8; ++k) aux_.push_back(idx[k]);
    for (int k = 0; k < 8; ++k) {
        int32_t bits;
        std::memcpy(&bits, &w[k], 4);
        aux_.push_back(bits);
    }
    return push(Op::HashGather, table, kNone, Shape{s.d[1]}, 0, 0, aux);
}

Tape::Id Tape::detach(Id a) { return push(Op::Detach, a, kNone, shape(a)); }

Tape::Id Tape::fma(Id acc, Id a, Id b) {
    require(shape(acc).numel() == 1 && shape(a).numel() == 1 && shape(b).numel() == 1,
            "fma: scalar operands only");
    int32_t aux = static_cast<int32_t>(aux_.size());
    aux_.push_back(acc);
    return push(Op::Fma, a, b, Shape{1}, 0, 0, aux);
}

Tape::Id Tape::mul_one_minus(Id a, Id b) {
    require(shape(a).numel() == 1 && shape(b).numel() == 1, "mul_one_minus: scalar operands only");
    return push(Op::MulOneMinus, a, b, Shape{1});
}

Tape::Id Tape::splat_alpha(const Id inputs[6], float px, float py) {
    int32_t aux = static_cast<int32_t>(aux_.size());
    for (int k = 0; k < 6; ++k) {
        require(shape(inputs[k]).numel() == 1, "splat_alpha: scalar inputs only");
        aux_.push_back(inputs[k]);
    }
    return push(Op::SplatAlpha, kNone, kNone, Shape{1}, px, py, aux);
}

// ---- forward ---------------------------------------------------------------

void Tape::forward_node(Node& n) {
    float* out = valp(n);
    const int64_t ne = nelem(n);
    const float* x = n.in0 != kNone ? vals_.data() + nodes_[n.in0].val : nullptr;
    const float* y = n.in1 != kNone ? vals_.data() + nodes_[n.in1].val : nullptr;
    const int64_t nx = n.in0 != kNone ? nelem(nodes_[n.in0]) : 0;
    const int64_t ny = n.in1 != kNone ? nelem(nodes_[n.in1]) : 0;

    switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
        break;
    case Op::Add:
        for (int64_t i = 0; i < ne; ++i) out[i] = x[nx == 1 ? 0 : i] + y[ny == 1 ? 0 : i];
        break;
    case Op::Sub:
        for (int64_t i = 0; i < ne; ++i) out[i] = x[nx == 1 ? 0 : i] - y[ny == 1 ? 0 : i];
        break;
    case Op::Mul:
        for (int64_t i = 0; i < ne; ++i) out[i] = x[nx == 1 ? 0 : i] * y[ny == 1 ? 0 : i];
        break;
    case Op::Div:
        for (int64_t i = 0; i < ne; ++i) out[i] = x[nx == 1 ? 0 : i] / y[ny == 1 ? 0 : i];
        break;
    case Op::AddC:
        for (int64_t i = 0; i < ne; ++i) out[i] = x[i] + n.a0;
        break;
    case Op::MulC:
        for (int64_t i = 0; i < ne; ++i) out[i] = x[i] * n.a0;
        break;
    case Op::RsubC:
        for (int64_t i = 0; i < ne; ++i) out[i] = n.a0 - x[i];
        break;
    case Op::PowC:
        for (int64_t i = 0; i < ne; ++i) out[i] = std::pow(x[i], n.a0);
        break;
    case Op::Exp:
        for (int64_t i = 0; i < ne; ++i) out[i] = safe_exp(x[i]);
        break;
    case Op::Log:
        for (int64_t i = 0; i < ne; ++i) out[i] = std::log(std::max(x[i], 1e-30f));
        break;
    case Op::Relu:
        for (int64_t i = 0; i < ne; ++i) out[i] = x[i] > 0 ? x[i] : 0.0f;
        break;
    case Op::Sigmoid:
        for (int64_t i = 0; i < ne; ++i) out[i] = stable_sigmoid(x[i]);
        break;
    case Op::Tanh:
        for (int64_t i = 0; i < ne; ++i) out[i] = std::tanh(x[i]);
        break;
    case Op::Softplus:
        for (int64_t i = 0; i < ne; ++i) out[i] = stable_softplus(x[i]);
        break;
    case Op::Clamp:
        for (int64_t i = 0; i < ne; ++i) out[i] = clampf(x[i], n.a0, n.a1);
        break;
    case Op::Matmul: {
        const Shape& sa = shapes_[nodes_[n.in0].shape];
        const Shape& sb = shapes_[nodes_[n.in1].shape];
        const int m = sa.d[0], k = sa.d[1];
        const int p = sb.ndim == 1 ? 1 : sb.d[1];
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < p; ++j) {
                float acc = 0;
                for (int l = 0; l < k; ++l) acc += x[i * k + l] * y[l * p + j];
                out[i * p + j] = acc;
            }
        break;
    }
    case Op::AddChan: {
        const Shape& s = shapes_[n.shape];
        const int64_t hw = static_cast<int64_t>(s.d[1]) * s.d[2];
        for (int c = 0; c < s.d[0]; ++c)
            for (int64_t i = 0; i < hw; ++i) out[c * hw + i] = x[c * hw + i] + y[c];
        break;
    }
    case Op::DwConv: {
        const Shape& s = shapes_[n.shape];
        const Shape& sk = shapes_[nodes_[n.in1].shape];
        const int C = s.d[0], H = s.d[1], W = s.d[2];
        const int kh = sk.d[1], kw = sk.d[2], ph = kh / 2, pw = kw / 2;
        for (int c = 0; c < C; ++c) {
            const float* xc = x + static_cast<int64_t>(c) * H * W;
            const float* kc = y + static_cast<int64_t>(c) * kh * kw;
            float* oc = out + static_cast<int64_t>(c) * H * W;
            for (int iy = 0; iy < H; ++iy)
                for (int ix = 0; ix < W; ++ix) {
                    float acc = 0;
                    for (int ky = 0; ky < kh; ++ky) {
                        int sy = iy + ky - ph;
                        if (sy < 0 || sy >= H) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            int sx = ix + kx - pw;
                            if (sx < 0 || sx >= W) continue;
                            acc += xc[sy * W + sx] * kc[ky * kw + kx];
                        }
                    }
                    oc[iy * W + ix] = acc;
                }
        }
        break;
    }
    case Op::PwConv: {
        const Shape& s = shapes_[n.shape];
        const Shape& si = shapes_[nodes_[n.in0].shape];
        const int C2 = s.d[0], C = si.d[0];
        const int64_t hw = static_cast<int64_t>(s.d[1]) * s.d[2];
        for (int o = 0; o < C2; ++o) {
            float* oc = out + o * hw;
            std::fill(oc, oc + hw, 0.0f);
            for (int c = 0; c < C; ++c) {
                const float wk = y[o * C + c];
                const float* xc = x + c * hw;
                for (int64_t i = 0; i < hw; ++i) oc[i] += wk * xc[i];
            }
        }
        break;
    }
    case Op::AvgPool2: {
        const Shape& s = shapes_[n.shape];
        const int C = s.d[0], H = s.d[1], W = s.d[2];
        const int Wi = W * 2;
        for (int c = 0; c < C; ++c)
            for (int iy = 0; iy < H; ++iy)
                for (int ix = 0; ix < W; ++ix) {
                    const float* base = x + (static_cast<int64_t>(c) * H * 2 + iy * 2) * Wi + ix * 2;
                    out[(static_cast<int64_t>(c) * H + iy) * W + ix] =
                        0.25f * (base[0] + base[1] + base[Wi] + base[Wi + 1]);
                }
        break;
    }
    case Op::Gap: {
        const Shape& si = shapes_[nodes_[n.in0].shape];
        const int64_t hw = static_cast<int64_t>(si.d[1]) * si.d[2];
        for (int c = 0; c < si.d[0]; ++c) {
            float acc = 0;
            for (int64_t i = 0; i < hw; ++i) acc += x[c * hw + i];
            out[c] = acc / static_cast<float>(hw);
        }
        break;
    }
    case Op::Bilinear: {
        const Shape& si = shapes_[nodes_[n.in0].shape];
        const int C = si.d[0], h = si.d[1], w = si.d[2];
        const float u = clampf(y[0], 0.0f, 1.0f);
        const float v = clampf(y[1], 0.0f, 1.0f);
        const float fx = u * (w - 1), fy = v * (h - 1);
        int x0 = std::min(static_cast<int>(fx), std::max(w - 2, 0));
        int y0 = std::min(static_cast<int>(fy), std::max(h - 2, 0));
        const float tx = w >= 2 ? fx - x0 : 0.0f;
        const float ty = h >= 2 ? fy - y0 : 0.0f;
        const int x1 = w >= 2 ? x0 + 1 : x0;
        const int y1 = h >= 2 ? y0 + 1 : y0;
        for (int c = 0; c < C; ++c) {
            const float* fc = x + static_cast<int64_t>(c) * h * w;
            out[c] = fc[y0 * w + x0] * (1 - tx) * (1 - ty) + fc[y0 * w + x1] * tx * (1 - ty) +
                     fc[y1 * w + x0] * (1 - tx) * ty + fc[y1 * w + x1] * tx * ty;
        }
        break;
    }
    case Op::Sum: {
        float acc = 0;
        for (int64_t i = 0; i < nx; ++i) acc += x[i];
        out[0] = acc;
        break;
    }
    case Op::Mean: {
        float acc = 0;
        for (int64_t i = 0; i < nx; ++i) acc += x[i];
        out[0] = acc / static_cast<float>(nx);
        break;
    }
    case Op::Slice: {
        const int32_t ofs = aux_[n.aux];
        for (int64_t i = 0; i < ne; ++i) out[i] = x[ofs + i];
        break;
    }
    case Op::ConcatN: {
        const int32_t np = aux_[n.aux];
        int64_t o = 0;
        for (int32_t p = 0; p < np; ++p) {
            const Node& src = nodes_[aux_[n.aux + 1 + p]];
            const int64_t len = nelem(src);
            std::memcpy(out + o, vals_.data() + src.val, len * sizeof(float));
            o += len;
        }
        break;
    }
    case Op::DiffX: {
        const Shape& s = shapes_[n.shape];
        const int C = s.d[0], H = s.d[1], W = s.d[2];
        const int Wi = W + 1;
        for (int c = 0; c < C; ++c)
            for (int iy = 0; iy < H; ++iy)
                for (int ix = 0; ix < W; ++ix)
                    out[(static_cast<int64_t>(c) * H + iy) * W + ix] =
                        x[(static_cast<int64_t>(c) * H + iy) * Wi + ix + 1] -
                        x[(static_cast<int64_t>(c) * H + iy) * Wi + ix];
        break;
    }
    case Op::DiffY: {
        const Shape& s = shapes_[n.shape];
        const int C = s.d[0], H = s.d[1], W = s.d[2];
        const int Hi = H + 1;
        for (int c = 0; c < C; ++c)
            for (int iy = 0; iy < H; ++iy)
                for (int ix = 0; ix < W; ++ix)
                    out[(static_cast<int64_t>(c) * H + iy) * W + ix] =
                        x[(static_cast<int64_t>(c) * Hi + iy + 1) * W + ix] -
                        x[(static_cast<int64_t>(c) * Hi + iy) * W + ix];
        break;
    }
    case Op::HashGather: {
        const Shape& st = shapes_[nodes_[n.in0].shape];
        const int F = st.d[1];
        for (int f = 0; f < F; ++f) out[f] = 0;
        for (int k = 0; k < 8; ++k) {
            const int32_t row = aux_[n.aux + k];
            float wk;
            std::memcpy(&wk, &aux_[n.aux + 8 + k], 4);
            for (int f = 0; f < F; ++f) out[f] += wk * x[static_cast<int64_t>(row) * F + f];
        }
        break;
    }
    case Op::Detach:
        std::memcpy(out, x, ne * sizeof(float));
        break;
    case Op::Fma:
        out[0] = vals_[nodes_[aux_[n.aux]].val] + x[0] * y[0];
        break;
    case Op::MulOneMinus:
        out[0] = x[0] * (1.0f - y[0]);
        break;
    case Op::SplatAlpha: {
        const float* v[6];
        for (int k = 0; k < 6; ++k) v[k] = vals_.data() + nodes_[aux_[n.aux + k]].val;
        out[0] = splat_alpha_eval(*v[0], *v[1], *v[2], *v[3], *v[4], *v[5], n.a0, n.a1);
        break;
    }
    }
}

// ---- backward --------------------------------------------------------------

void Tape::backward(Id output) {
    require(output >= 0 && output < static_cast<Id>(nodes_.size()), "backward: bad node");
    require(shape(output).numel() == 1, "backward: output must be scalar");
    grads_.assign(vals_.size(), 0.0f);
    grads_[nodes_[output].val] = 1.0f;
    for (Id i = output; i >= 0; --i) backward_node(nodes_[i]);
    grads_valid_ = true;
}

void Tape::backward_node(const Node& n) {
    if (n.op == Op::Leaf || n.op == Op::Constant) return;
    const float* g = grads_.data() + n.val;
    const float* out = valp(n);
    const int64_t ne = nelem(n);
    const float* x = n.in0 != kNone ? vals_.data() + nodes_[n.in0].val : nullptr;
    const float* y = n.in1 != kNone ? vals_.data() + nodes_[n.in1].val : nullptr;
    float* gx = n.in0 != kNone ? grads_.data() + nodes_[n.in0].val : nullptr;
    float* gy = n.in1 != kNone ? grads_.data() + nodes_[n.in1].val : nullptr;
    const int64_t nx = n.in0 != kNone ? nelem(nodes_[n.in0]) : 0;
    const int64_t ny = n.in1 != kNone ? nelem(nodes_[n.in1]) : 0;
    const bool skip_x = n.in0 != kNone && nodes_[n.in0].op == Op::Constant;
    const bool skip_y = n.in1 != kNone && nodes_[n.in1].op == Op::Constant;

    switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
        break;
    case Op::Add:
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i) gx[nx == 1 ? 0 : i] += g[i];
        if (!skip_y)
            for (int64_t i = 0; i < ne; ++i) gy[ny == 1 ? 0 : i] += g[i];
        break;
    case Op::Sub:
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i) gx[nx == 1 ? 0 : i] += g[i];
        if (!skip_y)
            for (int64_t i = 0; i < ne; ++i) gy[ny == 1 ? 0 : i] -= g[i];
        break;
    case Op::Mul:
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i) gx[nx == 1 ? 0 : i] += g[i] * y[ny == 1 ? 0 : i];
        if (!skip_y)
            for (int64_t i = 0; i < ne; ++i) gy[ny == 1 ? 0 : i] += g[i] * x[nx == 1 ? 0 : i];
        break;
    case Op::Div:
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i)
                if (g[i] != 0.0f) gx[nx == 1 ? 0 : i] += g[i] / y[ny == 1 ? 0 : i];
        if (!skip_y)
            for (int64_t i = 0; i < ne; ++i)
                if (g[i] != 0.0f) {
                    const float yi = y[ny == 1 ? 0 : i];
                    gy[ny == 1 ? 0 : i] -= g[i] * x[nx == 1 ? 0 : i] / (yi * yi);
                }
        break;
    case Op::AddC:
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i) gx[i] += g[i];
        break;
    case Op::MulC:
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i) gx[i] += g[i] * n.a0;
        break;
    case Op::RsubC:
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i) gx[i] -= g[i];
        break;
    case Op::PowC:
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i) {
                // Guard the base for fractional exponents so sqrt-like uses stay finite.
                float b = n.a0 < 1.0f ? std::max(x[i], 1e-12f) : x[i];
                gx[i] += g[i] * n.a0 * std::pow(b, n.a0 - 1.0f);
            }
        break;
    case Op::Exp:
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i) gx[i] += g[i] * out[i];
        break;
    case Op::Log:
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i) gx[i] += g[i] / std::max(x[i], 1e-30f);
        break;
    case Op::Relu:
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i) gx[i] += x[i] > 0 ? g[i] : 0.0f;
        break;
    case Op::Sigmoid:
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i) gx[i] += g[i] * out[i] * (1.0f - out[i]);
        break;
    case Op::Tanh:
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i) gx[i] += g[i] * (1.0f - out[i] * out[i]);
        break;
    case Op::Softplus:
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i) gx[i] += g[i] * stable_sigmoid(x[i]);
        break;
    case Op::Clamp:
        // Zero subgradient at (and outside) the clamp bounds.
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i)
                if (x[i] > n.a0 && x[i] < n.a1) gx[i] += g[i];
        break;
    case Op::Matmul: {
        const Shape& sa = shapes_[nodes_[n.in0].shape];
        const Shape& sb = shapes_[nodes_[n.in1].shape];
        const int m = sa.d[0], k = sa.d[1];
        const int p = sb.ndim == 1 ? 1 : sb.d[1];
        if (!skip_x)
            for (int i = 0; i < m; ++i)
                for (int l = 0; l < k; ++l) {
                    float acc = 0;
                    for (int j = 0; j < p; ++j) acc += g[i * p + j] * y[l * p + j];
                    gx[i * k + l] += acc;
                }
        if (!skip_y)
            for (int l = 0; l < k; ++l)
                for (int j = 0; j < p; ++j) {
                    float acc = 0;
                    for (int i = 0; i < m; ++i) acc += x[i * k + l] * g[i * p + j];
                    gy[l * p + j] += acc;
                }
        break;
    }
    case Op::AddChan: {
        const Shape& s = shapes_[n.shape];
        const int64_t hw = static_cast<int64_t>(s.d[1]) * s.d[2];
        if (!skip_x)
            for (int64_t i = 0; i < ne; ++i) gx[i] += g[i];
        if (!skip_y)
            for (int c = 0; c < s.d[0]; ++c) {
                float acc = 0;
                for (int64_t i = 0; i < hw; ++i) acc += g[c * hw + i];
                gy[c] += acc;
            }
        break;
    }
    case Op::DwConv: {
        const Shape& s = shapes_[n.shape];
        const Shape& sk = shapes_[nodes_[n.in1].shape];
        const int C = s.d[0], H = s.d[1], W = s.d[2];
        const int kh = sk.d[1], kw = sk.d[2], ph = kh / 2, pw = kw / 2;
        for (int c = 0; c < C; ++c) {
            const float* xc = x + static_cast<int64_t>(c) * H * W;
            const float* kc = y + static_cast<int64_t>(c) * kh * kw;
            const float* gc = g + static_cast<int64_t>(c) * H * W;
            float* gxc = gx ? gx + static_cast<int64_t>(c) * H * W : nullptr;
            float* gyc = gy ? gy + static_cast<int64_t>(c) * kh * kw : nullptr;
            for (int iy = 0; iy < H; ++iy)
                for (int ix = 0; ix < W; ++ix) {
                    const float go = gc[iy * W + ix];
                    if (go == 0.0f) continue;
                    for (int ky = 0; ky < kh; ++ky) {
                        int sy = iy + ky - ph;
                        if (sy < 0 || sy >= H) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            int sx = ix + kx - pw;
                            if (sx < 0 || sx >= W) continue;
                            if (!skip_x) gxc[sy * W + sx] += go * kc[ky * kw + kx];
                            if (!skip_y) gyc[ky * kw + kx] += go * xc[sy * W + sx];
                        }
                    }
                }
        }
        break;
    }
    case Op::PwConv: {
        const Shape& s = shapes_[n.shape];
        const Shape& si = shapes_[nodes_[n.in0].shape];
        const int C2 = s.d[0], C = si.d[0];
        const int64_t hw = static_cast<int64_t>(s.d[1]) * s.d[2];
        for (int o = 0; o < C2; ++o) {
            const float* go = g + o * hw;
            for (int c = 0; c < C; ++c) {
                const float wk = y[o * C + c];
                const float* xc = x + c * hw;
                float* gxc = gx ? gx + c * hw : nullptr;
                float wacc = 0;
                for (int64_t i = 0; i < hw; ++i) {
                    if (!skip_x) gxc[i] += go[i] * wk;
                    wacc += go[i] * xc[i];
                }
                if (!skip_y) gy[o * C + c] += wacc;
            }
        }
        break;
    }
    case Op::AvgPool2: {
        if (skip_x) break;
        const Shape& s = shapes_[n.shape];
        const int C = s.d[0], H = s.d[1], W = s.d[2];
        const int Wi = W * 2;
        for (int c = 0; c < C; ++c)
            for (int iy = 0; iy < H; ++iy)
                for (int ix = 0; ix < W; ++ix) {
                    const float go = 0.25f * g[(static_cast<int64_t>(c) * H + iy) * W + ix];
                    float* base = gx + (static_cast<int64_t>(c) * H * 2 + iy * 2) * Wi + ix * 2;
                    base[0] += go;
                    base[1] += go;
                    base[Wi] += go;
                    base[Wi + 1] += go;
                }
        break;
    }
    case Op::Gap: {
        if (skip_x) break;
        const Shape& si = shapes_[nodes_[n.in0].shape];
        const int64_t hw = static_cast<int64_t>(si.d[1]) * si.d[2];
        for (int c = 0; c < si.d[0]; ++c) {
            const float go = g[c] / static_cast<float>(hw);
            for (int64_t i = 0; i < hw; ++i) gx[c * hw + i] += go;
        }
        break;
    }
    case Op::Bilinear: {
        const Shape& si = shapes_[nodes_[n.in0].shape];
        const int C = si.d[0], h = si.d[1], w = si.d[2];
        const float uraw = y[0], vraw = y[1];
        const float u = clampf(uraw, 0.0f, 1.0f);
        const float v = clampf(vraw, 0.0f, 1.0f);
        const float fx = u * (w - 1), fy = v * (h - 1);
        int x0 = std::min(static_cast<int>(fx), std::max(w - 2, 0));
        int y0 = std::min(static_cast<int>(fy), std::max(h - 2, 0));
        const float tx = w >= 2 ? fx - x0 : 0.0f;
        const float ty = h >= 2 ? fy - y0 : 0.0f;
        const int x1 = w >= 2 ? x0 + 1 : x0;
        const int y1 = h >= 2 ? y0 + 1 : y0;
        float du = 0, dv = 0;
        for (int c = 0; c < C; ++c) {
            const float gc = g[c];
            const float* fc = x + static_cast<int64_t>(c) * h * w;
            if (!skip_x) {
                float* gxc = gx + static_cast<int64_t>(c) * h * w;
                gxc[y0 * w + x0] += gc * (1 - tx) * (1 - ty);
                gxc[y0 * w + x1] += gc * tx * (1 - ty);
                gxc[y1 * w + x0] += gc * (1 - tx) * ty;
                gxc[y1 * w + x1] += gc * tx * ty;
            }
            const float dfdtx = (fc[y0 * w + x1] - fc[y0 * w + x0]) * (1 - ty) +
                                (fc[y1 * w + x1] - fc[y1 * w + x0]) * ty;
            const float dfdty = (fc[y1 * w + x0] - fc[y0 * w + x0]) * (1 - tx) +
                                (fc[y1 * w + x1] - fc[y0 * w + x1]) * tx;
            du += gc * dfdtx * (w - 1);
            dv += gc * dfdty * (h - 1);
        }
        if (!skip_y) {
            // Clamped coordinates are constant w.r.t. uv.
            if (uraw > 0.0f && uraw < 1.0f) gy[0] += du;
            if (vraw > 0.0f && vraw < 1.0f) gy[1] += dv;
        }
        break;
    }
    case Op::Sum:
        if (!skip_x)
            for (int64_t i = 0; i < nx; ++i) gx[i] += g[0];
        break;
    case Op::Mean: {
        if (skip_x) break;
        const float go = g[0] / static_cast<float>(nx);
        for (int64_t i = 0; i < nx; ++i) gx[i] += go;
        break;
    }
    case Op::Slice: {
        if (skip_x) break;
        const int32_t ofs = aux_[n.aux];
        for (int64_t i = 0; i < ne; ++i) gx[ofs + i] += g[i];
        break;
    }
    case Op::ConcatN: {
        const int32_t np = aux_[n.aux];
        int64_t o = 0;
        for (int32_t p = 0; p < np; ++p) {
            const Node& src = nodes_[aux_[n.aux + 1 + p]];
            const int64_t len = nelem(src);
            if (src.op != Op::Constant) {
                float* gs = grads_.data() + src.val;
                for (int64_t i = 0; i < len; ++i) gs[i] += g[o + i];
            }
            o += len;
        }
        break;
    }
    case Op::DiffX: {
        if (skip_x) break;
        const Shape& s = shapes_[n.shape];
        const int C = s.d[0], H = s.d[1], W = s.d[2];
        const int Wi = W + 1;
        for (int c = 0; c < C; ++c)
            for (int iy = 0; iy < H; ++iy)
                for (int ix = 0; ix < W; ++ix) {
                    const float go = g[(static_cast<int64_t>(c) * H + iy) * W + ix];
                    gx[(static_cast<int64_t>(c) * H + iy) * Wi + ix + 1] += go;
                    gx[(static_cast<int64_t>(c) * H + iy) * Wi + ix] -= go;
                }
        break;
    }
    case Op::DiffY: {
        if (skip_x) break;
        const Shape& s = shapes_[n.shape];
        const int C = s.d[0], H = s.d[1], W = s.d[2];
        const int Hi = H + 1;
        for (int c = 0; c < C; ++c)
            for (int iy = 0; iy < H; ++iy)
                for (int ix = 0; ix < W; ++ix) {
                    const float go = g[(static_cast<int64_t>(c) * H + iy) * W + ix];
                    gx[(static_cast<int64_t>(c) * Hi + iy + 1) * W + ix] += go;
                    gx[(static_cast<int64_t>(c) * Hi + iy) * W + ix] -= go;
                }
        break;
    }
    case Op::HashGather: {
        if (skip_x) break;
        const Shape& st = shapes_[nodes_[n.in0].shape];
        const int F = st.d[1];
        for (int k = 0; k < 8; ++k) {
            const int32_t row = aux_[n.aux + k];
            float wk;
            std::memcpy(&wk, &aux_[n.aux + 8 + k], 4);
            for (int f = 0; f < F; ++f) gx[static_cast<int64_t>(row) * F + f] += wk * g[f];
        }
        break;
    }
    case Op::Detach:
        break;
    case Op::Fma: {
        const float go = g[0];
        if (go == 0.0f) break;
        const Node& acc = nodes_[aux_[n.aux]];
        if (acc.op != Op::Constant) grads_[acc.val] += go;
        if (!skip_x) gx[0] += go * y[0];
        if (!skip_y) gy[0] += go * x[0];
        break;
    }
    case Op::MulOneMinus:
        if (g[0] != 0.0f) {
            if (!skip_x) gx[0] += g[0] * (1.0f - y[0]);
            if (!skip_y) gy[0] -= g[0] * x[0];
        }
        break;
    case Op::SplatAlpha: {
        const float go = g[0];
        if (go == 0.0f) break;
        float v[6];
        for (int k = 0; k < 6; ++k) v[k] = vals_[nodes_[aux_[n.aux + k]].val];
        const float dx = n.a0 - v[3];
        const float dy = n.a1 - v[4];
        const float q = v[0] * dx * dx + v[1] * dx * dy + v[2] * dy * dy;
        const float e = safe_exp(q * -0.5f);
        const float raw = v[5] * e;
        if (raw >= 0.999f) break; // clamped: zero subgradient, as for Clamp
        const float dq = go * raw * -0.5f;
        float gin[6] = {dq * dx * dx,
                        dq * dx * dy,
                        dq * dy * dy,
                        -dq * (2.0f * v[0] * dx + v[1] * dy),
                        -dq * (2.0f * v[2] * dy + v[1] * dx),
                        go * e};
        for (int k = 0; k < 6; ++k) {
            const Node& src = nodes_[aux_[n.aux + k]];
            if (src.op != Op::Constant) grads_[src.val] += gin[k];
        }
        break;
    }
    }
}

// ---- finite differences ----------------------------------------------------

float grad_check(const std::function<Tape::Id(Tape&, Tape::Id)>& f,
                 std::span<const float> x, Shape shape, float h) {
    require(h > 0, "grad_check: h must be positive");
    Tape tape;
    Tape::Id in = tape.leaf(x, shape);
    Tape::Id out = f(tape, in);
    require(tape.shape(out).numel() == 1, "grad_check: f must be scalar-valued");
    tape.backward(out);
    std::vector<float> ad(tape.grad(in).begin(), tape.grad(in).end());

    std::vector<float> xp(x.begin(), x.end());
    auto eval = [&](const std::vector<float>& v) {
        Tape t;
        Tape::Id i = t.leaf(v, shape);
        return t.scalar(f(t, i));
    };
    float max_rel = 0;
    for (size_t i = 0; i < xp.size(); ++i) {
        const float x0 = xp[i];
        const float xhi = x0 + h;
        const float xlo = x0 - h;
        xp[i] = xhi;
        const double fp = eval(xp);
        xp[i] = xlo;
        const double fm = eval(xp);
        xp[i] = x0;
        // Divide by the realized (rounded) step, not the nominal one.
        const double cd = (fp - fm) / (static_cast<double>(xhi) - xlo);
        const double rel = std::abs(ad[i] - cd) / (std::abs(cd) + 1e-6);
        max_rel = std::max(max_rel, static_cast<float>(rel));
    }
    return max_rel;
}

} // namespace uwgs
