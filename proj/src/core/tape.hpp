// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "common.hpp"
#include "tensor.hpp"

namespace uwgs {

// Reverse-mode autodiff over a flat arena of f32 tensors. One Tape records one
// forward computation (typically one frame's loss); backward() walks the node
// list once in reverse. A Tape is confined to a single thread.
//
// Nodes are compact (32 bytes) because the renderer records per-pixel scalar
// ops: a desk-scale frame produces on the order of 10^6 nodes.
class Tape {
public:
    using Id = int32_t;
    static constexpr Id kNone = -1;

    enum class Op : uint8_t {
        Leaf,      // learnable input; gradient is reported to the caller
        Constant,  // fixed input; backward never pushes into it
        Add, Sub, Mul, Div,               // elementwise; scalar broadcast if one side has numel 1
        AddC, MulC, RsubC, PowC,          // tensor (+,*) immediate; a0 - x; x^a0
        Exp, Log, Relu, Sigmoid, Tanh, Softplus,
        Clamp,                            // clamp to [a0,a1]; zero gradient at and outside bounds
        Matmul,                           // [m,n]@[n]->[m] or [m,n]@[n,p]->[m,p]
        AddChan,                          // [C,H,W] + [C] per-channel bias
        DwConv,                           // depthwise conv, odd kernel, zero pad, stride 1
        PwConv,                           // 1x1 conv: weights [C2,C]
        AvgPool2,                         // 2x2 stride-2 average pool
        Gap,                              // global average pool [C,H,W]->[C]
        Bilinear,                         // (featmap [C,h,w], uv [2] in [0,1]^2) -> [C]
        Sum, Mean,                        // full reduction -> [1]
        Slice,                            // contiguous row-major slice starting at aux offset
        ConcatN,                          // concat n inputs (ids in aux) into an explicit shape
        DiffX, DiffY,                     // forward differences along width / height
        HashGather,                       // weighted gather of 8 rows of a [R,F] table
        Detach,                           // identity forward, zero backward
        // Fused scalar primitives for the splatting inner loop; they keep the
        // per-frame tape around 10^6 nodes instead of 10^7.
        Fma,                              // acc + a*b (acc in aux)
        MulOneMinus,                      // a * (1 - b)
        SplatAlpha,                       // clamped Gaussian splat opacity at a pixel
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Clears all nodes but keeps allocated capacity for reuse across steps.
    void reset();

    size_t node_count() const { return nodes_.size(); }

    Id leaf(std::span<const float> data, Shape s);
    Id constant(std::span<const float> data, Shape s);
    Id constant_scalar(float v);

    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);
    Id div(Id a, Id b);
    Id add_c(Id a, float c);
    Id mul_c(Id a, float c);
    Id rsub_c(Id a, float c); // c - a
    Id pow_c(Id a, float p);
    Id exp(Id a);
    Id log(Id a);
    Id relu(Id a);
    Id sigmoid(Id a);
    Id tanh(Id a);
    Id softplus(Id a);
    Id clamp(Id a, float lo, float hi);
    Id matmul(Id a, Id b);
    Id add_chan(Id a, Id bias);
    Id dw_conv(Id input, Id kernels);
    Id pw_conv(Id input, Id kernels);
    Id avg_pool2(Id a);
    Id gap(Id a);
    Id bilinear(Id featmap, Id uv);
    Id sum(Id a);
    Id mean(Id a);
    Id slice(Id a, int64_t offset, int64_t len);
    Id concat(std::span<const Id> parts, Shape out_shape);
    Id diff_x(Id a);
    Id diff_y(Id a);
    Id hash_gather(Id table, const int32_t idx[8], const float w[8]);
    Id detach(Id a);
    Id fma(Id acc, Id a, Id b); // scalars: acc + a*b
    Id mul_one_minus(Id a, Id b); // scalars: a * (1 - b)
    // min(0.999, opacity * exp(-q/2)) with q the splat's Mahalanobis form at
    // pixel (px,py); inputs = {inv_a, inv_b2, inv_c, mean_x, mean_y, opacity}.
    Id splat_alpha(const Id inputs[6], float px, float py);

    // Fast path for the splatting inner loop: records a scalar node whose
    // forward value the caller has already computed with the op's exact
    // expression (see splat_alpha_eval and the compositor). Skips the generic
    // dispatch; backward treats the node like any other.
    Id record_scalar(Op op, Id in0, Id in1, int32_t aux, float a0, float a1, float value) {
        Node n;
        n.op = op;
        n.in0 = in0;
        n.in1 = in1;
        n.shape = scalar_shape_id();
        n.val = static_cast<int32_t>(vals_.size());
        n.aux = aux;
        n.a0 = a0;
        n.a1 = a1;
        vals_.push_back(value);
        nodes_.push_back(n);
        grads_valid_ = false;
        return static_cast<Id>(nodes_.size() - 1);
    }
    int32_t push_aux(std::span<const Id> ids) {
        int32_t ofs = static_cast<int32_t>(aux_.size());
        aux_.insert(aux_.end(), ids.begin(), ids.end());
        return ofs;
    }
    float sval(Id id) const { return vals_[nodes_[id].val]; }

    // Convenience: |x| as relu(x) + relu(-x); subgradient 0 at 0.
    Id abs(Id a) { return add(relu(a), relu(mul_c(a, -1.0f))); }

    const Shape& shape(Id id) const { return shapes_[nodes_[id].shape]; }
    std::span<const float> val(Id id) const;
    float scalar(Id id) const { return val(id)[0]; }

    // Reverse pass from a scalar output. Gradients of every node become
    // readable via grad(); leaves not reachable from `output` keep zeros.
    void backward(Id output);
    std::span<const float> grad(Id id) const;

private:
    struct Node { // 32 bytes; millions are recorded per frame
        Op op;
        uint8_t pad0 = 0;
        uint16_t pad1 = 0;
        int32_t shape = 0;
        Id in0 = kNone, in1 = kNone;
        int32_t val = 0;  // offset into arena (f32 count)
        int32_t aux = -1; // offset into aux_
        float a0 = 0, a1 = 0;
    };

    int32_t intern_shape(const Shape& s);
    int32_t scalar_shape_id() {
        if (scalar_shape_ < 0) {
            shapes_.push_back(Shape{1});
            scalar_shape_ = static_cast<int32_t>(shapes_.size() - 1);
        }
        return scalar_shape_;
    }
    Id push(Op op, Id in0, Id in1, const Shape& s, float a0 = 0, float a1 = 0, int32_t aux = -1);
    void forward_node(Node& n);
    void backward_node(const Node& n);
    float* valp(const Node& n) { return vals_.data() + n.val; }
    const float* valp(const Node& n) const { return vals_.data() + n.val; }
    float* gradp(const Node& n) { return grads_.data() + n.val; }
    int64_t nelem(const Node& n) const { return shapes_[n.shape].numel(); }

    std::vector<Node> nodes_;
    std::vector<float> vals_;
    std::vector<float> grads_;
    std::vector<int32_t> aux_;
    std::vector<Shape> shapes_;
    int32_t scalar_shape_ = -1;
    int32_t last_shape_ = -1;
    bool grads_valid_ = false;
};

// Max relative error between the tape gradient of f and central finite
// differences, maximized over the components of x. f must build a scalar.
float grad_check(const std::function<Tape::Id(Tape&, Tape::Id)>& f,
                 std::span<const float> x, Shape shape, float h);

// Shared forward expression for the SplatAlpha op; the plain renderer uses
// the same function so recorded and unrecorded renders agree bitwise.
inline float splat_alpha_eval(float inv_a, float inv_b2, float inv_c, float mean_x, float mean_y,
                              float opacity, float px, float py) {
    const float dx = px - mean_x;
    const float dy = py - mean_y;
    const float q = inv_a * dx * dx + inv_b2 * dx * dy + inv_c * dy * dy;
    return std::min(0.999f, opacity * std::exp(q * -0.5f));
}

} // namespace uwgs
