#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/rng.hpp"
#include "core/tape.hpp"

using namespace uwgs;

TEST_CASE("backward: f(x)=x^2 at x=3 gives grad 6") {
    Tape t;
    float x = 3.0f;
    auto xi = t.leaf(std::span<const float>(&x, 1), Shape{1});
    auto y = t.mul(xi, xi);
    t.backward(y);
    CHECK(t.grad(xi)[0] == doctest::Approx(6.0f));
}

TEST_CASE("backward: f(x,y)=x*y gives grads (y,x)") {
    Tape t;
    float x = 2.0f, y = 5.0f;
    auto xi = t.leaf(std::span<const float>(&x, 1), Shape{1});
    auto yi = t.leaf(std::span<const float>(&y, 1), Shape{1});
    auto z = t.mul(xi, yi);
    t.backward(z);
    CHECK(t.grad(xi)[0] == doctest::Approx(5.0f));
    CHECK(t.grad(yi)[0] == doctest::Approx(2.0f));
}

TEST_CASE("backward: composite exp/mul/sum matches finite differences") {
    Pcg32 rng(42);
    std::vector<float> x(4);
    for (float& v : x) v = rng.uniform(-1.0f, 1.0f);
    float err = grad_check(
        [](Tape& t, Tape::Id in) {
            auto e = t.exp(in);
            auto m = t.mul(e, in);
            return t.sum(m);
        },
        x, Shape{4}, 1e-3f);
    CHECK(err < 1e-3f);
}

TEST_CASE("backward requires a scalar output") {
    Tape t;
    std::vector<float> x{1, 2};
    auto xi = t.leaf(x, Shape{2});
    auto y = t.mul(xi, xi);
    CHECK_THROWS_AS(t.backward(y), InvalidArgument);
}

TEST_CASE("gradients of unused leaves are zero") {
    Tape t;
    float a = 1.5f, b = 2.5f;
    auto ai = t.leaf(std::span<const float>(&a, 1), Shape{1});
    auto bi = t.leaf(std::span<const float>(&b, 1), Shape{1});
    auto y = t.mul(ai, ai);
    t.backward(y);
    CHECK(t.grad(bi)[0] == 0.0f);
}

TEST_CASE("grad_check: sum is exact") {
    // Dyadic values and a dyadic step keep every f32 operation exact, so the
    // central difference equals the gradient bit for bit.
    std::vector<float> x{0.25f, -0.5f, 1.0f, 0.125f};
    float err = grad_check([](Tape& t, Tape::Id in) { return t.sum(in); }, x, Shape{4}, 0.0009765625f);
    CHECK(err == 0.0f);
}

TEST_CASE("grad_check: sum(exp(x)) on random input") {
    Pcg32 rng(7);
    std::vector<float> x(4);
    for (float& v : x) v = rng.uniform(-1.0f, 1.0f);
    float err = grad_check([](Tape& t, Tape::Id in) { return t.sum(t.exp(in)); }, x, Shape{4}, 1e-3f);
    CHECK(err < 1e-3f);
}

TEST_CASE("elementwise op gradients match finite differences on 100 random instances") {
    Pcg32 rng(123);
    struct Case {
        const char* name;
        std::function<Tape::Id(Tape&, Tape::Id)> f;
        float lo, hi;
    };
    // Instances keep per-component gradients bounded away from zero: f32
    // central differences cannot resolve a vanishing gradient against the
    // 1e-6 denominator floor, so zero-gradient points are not informative.
    std::vector<Case> cases = {
        {"add", [](Tape& t, Tape::Id x) { return t.sum(t.add(x, x)); }, 0.2f, 1.5f},
        {"sub_c", [](Tape& t, Tape::Id x) { return t.sum(t.rsub_c(x, 1.0f)); }, 0.2f, 1.5f},
        {"mul", [](Tape& t, Tape::Id x) { return t.sum(t.mul(x, x)); }, 0.3f, 1.5f},
        {"div", [](Tape& t, Tape::Id x) { return t.sum(t.div(t.rsub_c(t.mul_c(x, 0.0f), 2.0f), x)); },
         0.4f, 1.5f},
        {"exp", [](Tape& t, Tape::Id x) { return t.sum(t.exp(x)); }, 0.0f, 1.0f},
        {"log", [](Tape& t, Tape::Id x) { return t.sum(t.log(x)); }, 0.3f, 2.0f},
        {"pow", [](Tape& t, Tape::Id x) { return t.sum(t.pow_c(x, 0.5f)); }, 0.3f, 2.0f},
        {"relu", [](Tape& t, Tape::Id x) { return t.sum(t.relu(x)); }, 0.1f, 1.5f},
        {"sigmoid", [](Tape& t, Tape::Id x) { return t.sum(t.sigmoid(x)); }, 0.0f, 1.5f},
        {"tanh", [](Tape& t, Tape::Id x) { return t.sum(t.tanh(x)); }, 0.0f, 1.2f},
        {"softplus", [](Tape& t, Tape::Id x) { return t.sum(t.softplus(x)); }, 0.2f, 1.5f},
        {"mean", [](Tape& t, Tape::Id x) { return t.mean(t.mul(x, x)); }, 0.3f, 1.5f},
        {"clamp", [](Tape& t, Tape::Id x) { return t.sum(t.mul(x, t.clamp(x, -2.5f, 2.5f))); },
         0.3f, 1.5f},
    };
    for (const auto& c : cases) {
        float worst = 0;
        for (int it = 0; it < 100; ++it) {
            std::vector<float> x(4);
            for (float& v : x) v = rng.uniform(c.lo, c.hi);
            worst = std::max(worst, grad_check(c.f, x, Shape{4}, 1e-2f));
        }
        INFO(c.name);
        CHECK(worst < 1e-3f);
    }
}

TEST_CASE("linearity of backward: a*f + b*g") {
    Pcg32 rng(5);
    std::vector<float> x(5);
    for (float& v : x) v = rng.uniform(-1, 1);
    const float a = 2.5f, b = -1.25f;

    auto gradient = [&](const std::function<Tape::Id(Tape&, Tape::Id)>& fn) {
        Tape t;
        auto xi = t.leaf(x, Shape{5});
        t.backward(fn(t, xi));
        return std::vector<float>(t.grad(xi).begin(), t.grad(xi).end());
    };
    auto f = [](Tape& t, Tape::Id xi) { return t.sum(t.exp(xi)); };
    auto g = [](Tape& t, Tape::Id xi) { return t.sum(t.mul(xi, xi)); };
    auto gf = gradient(f), gg = gradient(g);
    auto gc = gradient([&](Tape& t, Tape::Id xi) {
        return t.add(t.mul_c(f(t, xi), a), t.mul_c(g(t, xi), b));
    });
    for (size_t i = 0; i < x.size(); ++i)
        CHECK(gc[i] == doctest::Approx(a * gf[i] + b * gg[i]).epsilon(1e-6));
}

TEST_CASE("determinism: identical inputs produce bit-identical outputs") {
    auto run = [] {
        Pcg32 rng(99);
        std::vector<float> x(16);
        for (float& v : x) v = rng.uniform(-1, 1);
        Tape t;
        auto xi = t.leaf(x, Shape{16});
        auto y = t.sum(t.mul(t.sigmoid(xi), t.exp(t.mul_c(xi, 0.5f))));
        t.backward(y);
        std::vector<float> out(t.grad(xi).begin(), t.grad(xi).end());
        out.push_back(t.scalar(y));
        return out;
    };
    auto r1 = run(), r2 = run();
    CHECK(r1 == r2);
}

// ---- depthwise-separable convolution ----------------------------------------

namespace {

// Independent nested-loop oracle for depthwise 3x3 + pointwise 1x1.
std::vector<float> conv_oracle(const std::vector<float>& in, int C, int H, int W,
                               const std::vector<float>& dwk, const std::vector<float>& pwk,
                               int C2) {
    std::vector<float> mid(C * H * W, 0.0f);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double acc = 0;
                for (int ky = -1; ky <= 1; ++ky)
                    for (int kx = -1; kx <= 1; ++kx) {
                        int sy = y + ky, sx = x + kx;
                        if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                        acc += in[(c * H + sy) * W + sx] * dwk[(c * 3 + ky + 1) * 3 + kx + 1];
                    }
                mid[(c * H + y) * W + x] = static_cast<float>(acc);
            }
    std::vector<float> out(C2 * H * W, 0.0f);
    for (int o = 0; o < C2; ++o)
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < H * W; ++i) out[o * H * W + i] += pwk[o * C + c] * mid[c * H * W + i];
    return out;
}

} // namespace

TEST_CASE("depthwise separable conv: zero input -> zero output") {
    Tape t;
    std::vector<float> in(2 * 4 * 4, 0.0f), dwk(2 * 9, 0.5f), pwk(2 * 2, 0.7f);
    auto y = t.pw_conv(t.dw_conv(t.constant(in, Shape{2, 4, 4}), t.constant(dwk, Shape{2, 3, 3})),
                       t.constant(pwk, Shape{2, 2}));
    for (float v : t.val(y)) CHECK(v == 0.0f);
}

TEST_CASE("depthwise separable conv: identity kernels reproduce the input") {
    Tape t;
    Pcg32 rng(3);
    std::vector<float> in(3 * 4 * 4);
    for (float& v : in) v = rng.uniform(-1, 1);
    std::vector<float> dwk(3 * 9, 0.0f);
    for (int c = 0; c < 3; ++c) dwk[c * 9 + 4] = 1.0f; // center taps
    std::vector<float> pwk(3 * 3, 0.0f);
    for (int c = 0; c < 3; ++c) pwk[c * 3 + c] = 1.0f; // identity mixing
    auto y = t.pw_conv(t.dw_conv(t.constant(in, Shape{3, 4, 4}), t.constant(dwk, Shape{3, 3, 3})),
                       t.constant(pwk, Shape{3, 3}));
    auto out = t.val(y);
    for (size_t i = 0; i < in.size(); ++i) CHECK(out[i] == doctest::Approx(in[i]));
}

TEST_CASE("depthwise separable conv matches the nested-loop oracle") {
    Pcg32 rng(11);
    std::vector<float> in(2 * 4 * 4), dwk(2 * 9), pwk(3 * 2);
    for (float& v : in) v = rng.uniform(-1, 1);
    for (float& v : dwk) v = rng.uniform(-1, 1);
    for (float& v : pwk) v = rng.uniform(-1, 1);
    Tape t;
    auto y = t.pw_conv(t.dw_conv(t.constant(in, Shape{2, 4, 4}), t.constant(dwk, Shape{2, 3, 3})),
                       t.constant(pwk, Shape{3, 2}));
    auto expect = conv_oracle(in, 2, 4, 4, dwk, pwk, 3);
    auto got = t.val(y);
    REQUIRE(got.size() == expect.size());
    for (size_t i = 0; i < expect.size(); ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-5));
}

TEST_CASE("conv rejects channel mismatch") {
    Tape t;
    std::vector<float> in(2 * 4 * 4, 0.0f), dwk(3 * 9, 0.0f);
    CHECK_THROWS_AS(t.dw_conv(t.constant(in, Shape{2, 4, 4}), t.constant(dwk, Shape{3, 3, 3})),
                    InvalidArgument);
}

TEST_CASE("conv/pool/matmul gradients match finite differences") {
    Pcg32 rng(17);
    SUBCASE("dw_conv w.r.t. input") {
        std::vector<float> x(2 * 4 * 4), k(2 * 9);
        for (float& v : x) v = rng.uniform(-1, 1);
        for (float& v : k) v = rng.uniform(-1, 1);
        float err = grad_check(
            [&](Tape& t, Tape::Id in) {
                return t.sum(t.dw_conv(in, t.constant(k, Shape{2, 3, 3})));
            },
            x, Shape{2, 4, 4}, 1e-2f);
        CHECK(err < 1e-3f);
    }
    SUBCASE("dw_conv w.r.t. kernels") {
        std::vector<float> x(2 * 4 * 4), k(2 * 9);
        for (float& v : x) v = rng.uniform(-1, 1);
        for (float& v : k) v = rng.uniform(-1, 1);
        float err = grad_check(
            [&](Tape& t, Tape::Id kk) {
                return t.sum(t.dw_conv(t.constant(x, Shape{2, 4, 4}), kk));
            },
            k, Shape{2, 3, 3}, 1e-2f);
        CHECK(err < 1e-3f);
    }
    SUBCASE("pw_conv + avg_pool2 + gap") {
        std::vector<float> x(2 * 4 * 4), k(3 * 2);
        for (float& v : x) v = rng.uniform(-1, 1);
        for (float& v : k) v = rng.uniform(-1, 1);
        float err = grad_check(
            [&](Tape& t, Tape::Id in) {
                auto y = t.pw_conv(in, t.constant(k, Shape{3, 2}));
                return t.sum(t.gap(t.avg_pool2(y)));
            },
            x, Shape{2, 4, 4}, 1e-2f);
        CHECK(err < 1e-3f);
    }
    SUBCASE("matmul both sides") {
        std::vector<float> w(3 * 4), x(4);
        for (float& v : w) v = rng.uniform(-1, 1);
        for (float& v : x) v = rng.uniform(-1, 1);
        float e1 = grad_check(
            [&](Tape& t, Tape::Id ww) {
                return t.sum(t.matmul(ww, t.constant(x, Shape{4})));
            },
            w, Shape{3, 4}, 1e-2f);
        float e2 = grad_check(
            [&](Tape& t, Tape::Id xx) {
                return t.sum(t.matmul(t.constant(w, Shape{3, 4}), xx));
            },
            x, Shape{4}, 1e-2f);
        CHECK(e1 < 1e-3f);
        CHECK(e2 < 1e-3f);
    }
}

// ---- bilinear sampling -------------------------------------------------------

TEST_CASE("bilinear: texel centers and corner mean") {
    Tape t;
    std::vector<float> fm{1, 2, 3, 4}; // [[1,2],[3,4]]
    auto f = t.constant(fm, Shape{1, 2, 2});

    std::vector<float> uv{0, 0};
    CHECK(t.val(t.bilinear(f, t.constant(uv, Shape{2})))[0] == doctest::Approx(1.0f));
    uv = {1, 1};
    CHECK(t.val(t.bilinear(f, t.constant(uv, Shape{2})))[0] == doctest::Approx(4.0f));
    uv = {0.5f, 0.5f};
    CHECK(t.val(t.bilinear(f, t.constant(uv, Shape{2})))[0] == doctest::Approx(2.5f));
}

TEST_CASE("bilinear: constant featmap is constant in uv; out-of-range uv clamps") {
    Tape t;
    std::vector<float> fm(2 * 3 * 3, 0.75f);
    auto f = t.constant(fm, Shape{2, 3, 3});
    Pcg32 rng(21);
    for (int i = 0; i < 20; ++i) {
        std::vector<float> uv{rng.uniform(-0.5f, 1.5f), rng.uniform(-0.5f, 1.5f)};
        auto out = t.val(t.bilinear(f, t.constant(uv, Shape{2})));
        CHECK(out[0] == doctest::Approx(0.75f));
        CHECK(out[1] == doctest::Approx(0.75f));
    }
}

TEST_CASE("bilinear gradients (featmap and uv) match finite differences") {
    Pcg32 rng(31);
    std::vector<float> fm(2 * 3 * 3);
    for (float& v : fm) v = rng.uniform(-1, 1);
    std::vector<float> uv{0.37f, 0.58f};
    float e1 = grad_check(
        [&](Tape& t, Tape::Id f) {
            return t.sum(t.bilinear(f, t.constant(uv, Shape{2})));
        },
        fm, Shape{2, 3, 3}, 1e-3f);
    float e2 = grad_check(
        [&](Tape& t, Tape::Id u) {
            return t.sum(t.bilinear(t.constant(fm, Shape{2, 3, 3}), u));
        },
        uv, Shape{2}, 1e-3f);
    CHECK(e1 < 1e-3f);
    CHECK(e2 < 1e-3f);
}

TEST_CASE("slice/concat/diff/hash_gather forward and backward") {
    Pcg32 rng(41);
    SUBCASE("slice + concat round structure") {
        std::vector<float> x(6);
        for (float& v : x) v = rng.uniform(-1, 1);
        float err = grad_check(
            [](Tape& t, Tape::Id in) {
                auto a = t.slice(in, 0, 3);
                auto b = t.slice(in, 3, 3);
                std::array<Tape::Id, 2> parts{b, a};
                return t.sum(t.mul(t.concat(parts, Shape{6}), t.concat(parts, Shape{6})));
            },
            x, Shape{6}, 1e-3f);
        CHECK(err < 1e-3f);
    }
    SUBCASE("diff_x/diff_y") {
        // Width-2 (height-2) maps give each element exactly one difference
        // term, so no gradient component can cancel to zero.
        std::vector<float> x(1 * 3 * 2);
        for (float& v : x) v = rng.uniform(-1, 1);
        float ex = grad_check(
            [](Tape& t, Tape::Id in) { return t.sum(t.exp(t.diff_x(in))); }, x, Shape{1, 3, 2},
            1e-2f);
        float ey = grad_check(
            [](Tape& t, Tape::Id in) { return t.sum(t.exp(t.diff_y(in))); }, x, Shape{1, 2, 3},
            1e-2f);
        CHECK(ex < 1e-3f);
        CHECK(ey < 1e-3f);
    }
    SUBCASE("hash_gather scatters weighted grads") {
        std::vector<float> table(10 * 2);
        for (float& v : table) v = rng.uniform(-1, 1);
        int32_t idx[8] = {0, 1, 2, 3, 4, 5, 6, 7};
        float w[8];
        for (int i = 0; i < 8; ++i) w[i] = rng.uniform(0, 1);
        float err = grad_check(
            [&](Tape& t, Tape::Id tb) { return t.sum(t.hash_gather(tb, idx, w)); }, table,
            Shape{10, 2}, 1e-3f);
        CHECK(err < 1e-3f);
    }
}

TEST_CASE("fused splatting primitives match finite differences") {
    Pcg32 rng(71);
    float worst = 0;
    for (int it = 0; it < 100; ++it) {
        const float ia = rng.uniform(0.2f, 1.0f), ic = rng.uniform(0.2f, 1.0f);
        std::vector<float> x{ia,
                             rng.uniform(-0.2f, 0.2f),
                             ic,
                             rng.uniform(4.5f, 5.5f),
                             rng.uniform(4.5f, 5.5f),
                             rng.uniform(0.3f, 0.9f),
                             rng.uniform(0.1f, 0.9f),
                             rng.uniform(0.1f, 0.9f),
                             rng.uniform(0.1f, 0.9f)};
        worst = std::max(worst, grad_check(
                                    [&](Tape& t, Tape::Id in) {
                                        Tape::Id parts[6];
                                        for (int i = 0; i < 6; ++i) parts[i] = t.slice(in, i, 1);
                                        Tape::Id a = t.splat_alpha(parts, 5.0f, 5.0f);
                                        Tape::Id f = t.fma(t.slice(in, 6, 1), t.slice(in, 7, 1), a);
                                        return t.sum(t.mul_one_minus(f, t.slice(in, 8, 1)));
                                    },
                                    x, Shape{9}, 1e-2f));
    }
    CHECK(worst < 1e-3f);
}

TEST_CASE("splat_alpha clamps at 0.999 with zero subgradient") {
    Tape t;
    // Opacity high and pixel at the center: raw alpha exceeds the clamp.
    std::vector<float> in{1.0f, 0.0f, 1.0f, 5.0f, 5.0f, 0.9999f};
    Tape::Id leaf = t.leaf(in, Shape{6});
    Tape::Id parts[6];
    for (int i = 0; i < 6; ++i) parts[i] = t.slice(leaf, i, 1);
    Tape::Id a = t.splat_alpha(parts, 5.0f, 5.0f);
    CHECK(t.scalar(a) == 0.999f);
    t.backward(t.sum(a));
    for (float g : t.grad(leaf)) CHECK(g == 0.0f);
}

TEST_CASE("detach stops gradients exactly") {
    Tape t;
    float x = 1.7f;
    auto xi = t.leaf(std::span<const float>(&x, 1), Shape{1});
    auto y = t.add(t.mul(xi, xi), t.detach(t.mul_c(xi, 3.0f)));
    t.backward(y);
    CHECK(t.grad(xi)[0] == doctest::Approx(2.0f * x)); // only the x^2 path
}

TEST_CASE("forward values stay finite on finite inputs") {
    Pcg32 rng(55);
    Tape t;
    std::vector<float> x(32);
    for (float& v : x) v = rng.uniform(-30, 30);
    auto xi = t.leaf(x, Shape{32});
    for (auto id : {t.exp(xi), t.softplus(xi), t.sigmoid(xi), t.tanh(xi), t.log(t.abs(xi))}) {
        for (float v : t.val(id)) CHECK(std::isfinite(v));
    }
}
