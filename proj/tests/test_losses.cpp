#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "core/losses.hpp"
#include "core/rng.hpp"

using namespace uwgs;

namespace {

HostTensor random_map(Shape s, uint64_t seed, float lo = 0, float hi = 1) {
    Pcg32 rng(seed);
    HostTensor t(s);
    for (float& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

float ssim_of(const HostTensor& a, const HostTensor& b) {
    Tape t;
    return t.scalar(ssim(t, t.constant(a.data, a.shape), t.constant(b.data, b.shape)));
}

} // namespace

TEST_CASE("photometric loss of identical images is zero") {
    HostTensor img = random_map(Shape{3, 16, 16}, 1);
    Tape t;
    auto a = t.constant(img.data, img.shape);
    auto b = t.constant(img.data, img.shape);
    CHECK(t.scalar(photometric_loss(t, a, b, {})) == doctest::Approx(0.0f).epsilon(1e-6));
}

TEST_CASE("photometric loss on flat images: L1 part and closed-form SSIM luminance") {
    // Flat images c and c+0.1 per channel: the SSIM map reduces to the
    // luminance term everywhere (boundary windows are renormalized).
    const float c0[3] = {0.3f, 0.5f, 0.65f};
    HostTensor a(Shape{3, 12, 12}), b(Shape{3, 12, 12});
    for (int ch = 0; ch < 3; ++ch)
        for (int i = 0; i < 144; ++i) {
            a.data[ch * 144 + i] = c0[ch];
            b.data[ch * 144 + i] = c0[ch] + 0.1f;
        }
    double ssim_expect = 0;
    for (int ch = 0; ch < 3; ++ch) {
        const double mu_a = c0[ch], mu_b = c0[ch] + 0.1;
        ssim_expect += (2 * mu_a * mu_b + 1e-4) / (mu_a * mu_a + mu_b * mu_b + 1e-4);
    }
    ssim_expect /= 3.0;

    // f32 variance cancellation perturbs the contrast term by ~1e-5.
    CHECK(ssim_of(a, b) == doctest::Approx(ssim_expect).epsilon(1e-4));

    LossWeights w;
    Tape t;
    float loss = t.scalar(
        photometric_loss(t, t.constant(a.data, a.shape), t.constant(b.data, b.shape), w));
    const double expect = 0.8 * 0.1 + 0.2 * (1.0 - ssim_expect) / 2.0;
    CHECK(loss == doctest::Approx(expect).epsilon(1e-4));
    CHECK(0.8 * 0.1 == doctest::Approx(0.08)); // the L1 part alone
}

TEST_CASE("photometric loss: all-zero vs all-one has L1 part 0.8") {
    HostTensor a(Shape{3, 8, 8}, 0.0f), b(Shape{3, 8, 8}, 1.0f);
    LossWeights w;
    w.lambda2 = 0; // isolate the L1 term
    Tape t;
    float loss = t.scalar(
        photometric_loss(t, t.constant(a.data, a.shape), t.constant(b.data, b.shape), w));
    CHECK(loss == doctest::Approx(0.8f).epsilon(1e-6));
}

TEST_CASE("SSIM: identity is exactly 1 and symmetry holds to 1e-6") {
    HostTensor a = random_map(Shape{3, 16, 16}, 3);
    HostTensor b = random_map(Shape{3, 16, 16}, 4);
    CHECK(ssim_of(a, a) == doctest::Approx(1.0f).epsilon(1e-7));
    CHECK(ssim_of(a, b) == doctest::Approx(ssim_of(b, a)).epsilon(1e-6));
}

TEST_CASE("pearson depth loss: affine invariance and anticorrelation") {
    HostTensor d = random_map(Shape{1, 8, 8}, 5);
    HostTensor affine(d.shape), neg(d.shape);
    for (size_t i = 0; i < d.data.size(); ++i) {
        affine.data[i] = 2.0f * d.data[i] + 3.0f;
        neg.data[i] = -d.data[i];
    }
    Tape t;
    auto pseudo = t.constant(d.data, d.shape);
    CHECK(t.scalar(pearson_depth_loss(t, pseudo, t.constant(affine.data, affine.shape))) <
          1e-6f);
    CHECK(t.scalar(pearson_depth_loss(t, pseudo, t.constant(neg.data, neg.shape))) ==
          doctest::Approx(2.0f).epsilon(1e-6));
}

TEST_CASE("pearson depth loss matches a direct two-pass covariance oracle") {
    HostTensor a = random_map(Shape{1, 8, 8}, 7);
    HostTensor b = random_map(Shape{1, 8, 8}, 8);
    double ma = 0, mb = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        ma += a.data[i];
        mb += b.data[i];
    }
    ma /= a.data.size();
    mb /= b.data.size();
    double cov = 0, va = 0, vb = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        cov += (a.data[i] - ma) * (b.data[i] - mb);
        va += (a.data[i] - ma) * (a.data[i] - ma);
        vb += (b.data[i] - mb) * (b.data[i] - mb);
    }
    const double n = static_cast<double>(a.data.size());
    const double expect =
        1.0 - (cov / n) / ((std::sqrt(va / n) + 1e-8) * (std::sqrt(vb / n) + 1e-8));
    Tape t;
    float got = t.scalar(
        pearson_depth_loss(t, t.constant(a.data, a.shape), t.constant(b.data, b.shape)));
    CHECK(got == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("pearson depth loss: constant maps stay finite (~1)") {
    HostTensor flat(Shape{1, 8, 8}, 0.37f);
    HostTensor d = random_map(Shape{1, 8, 8}, 9);
    Tape t;
    float v = t.scalar(
        pearson_depth_loss(t, t.constant(d.data, d.shape), t.constant(flat.data, flat.shape)));
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(1.0f).epsilon(1e-3));
}

TEST_CASE("edge-aware smoothness: zero on constant depth, reduction at the weight extremes") {
    HostTensor pseudo = random_map(Shape{1, 8, 8}, 11);
    HostTensor img = random_map(Shape{3, 8, 8}, 12);
    Tape t;
    HostTensor flat(Shape{1, 8, 8}, 0.8f);
    CHECK(t.scalar(edge_aware_smoothness(t, t.constant(flat.data, flat.shape), pseudo, img)) ==
          doctest::Approx(0.0f));

    // Pseudo-depth identically 0 with a flat pseudo map: weights are exp(0)=1,
    // so the loss is the plain mean |grad D| (same for pseudo identically 1
    // with a flat image).
    HostTensor depth = random_map(Shape{1, 8, 8}, 13);
    double expect = 0;
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x + 1 < 8; ++x) expect += std::fabs(depth.at(0, y, x + 1) - depth.at(0, y, x));
    for (int y = 0; y + 1 < 8; ++y)
        for (int x = 0; x < 8; ++x) expect += std::fabs(depth.at(0, y + 1, x) - depth.at(0, y, x));
    expect /= 64.0;

    HostTensor zeros(Shape{1, 8, 8}, 0.0f);
    float got0 = t.scalar(
        edge_aware_smoothness(t, t.constant(depth.data, depth.shape), zeros, img));
    CHECK(got0 == doctest::Approx(expect).epsilon(1e-5));

    HostTensor ones(Shape{1, 8, 8}, 1.0f);
    HostTensor flat_img(Shape{3, 8, 8}, 0.5f);
    float got1 = t.scalar(
        edge_aware_smoothness(t, t.constant(depth.data, depth.shape), ones, flat_img));
    CHECK(got1 == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("edge-aware smoothness is nonnegative and zero only for constant depth") {
    HostTensor pseudo = random_map(Shape{1, 8, 8}, 14);
    HostTensor img = random_map(Shape{3, 8, 8}, 15);
    Pcg32 rng(16);
    Tape t;
    for (int it = 0; it < 20; ++it) {
        HostTensor depth = random_map(Shape{1, 8, 8}, 100 + it);
        float v = t.scalar(
            edge_aware_smoothness(t, t.constant(depth.data, depth.shape), pseudo, img));
        CHECK(v > 0.0f);
    }
    (void)rng;
}

TEST_CASE("epsilon regularization: values and exact gradient 2*eps") {
    Tape t;
    std::vector<float> zero(6, 0.0f);
    std::array<Tape::Id, 2> zs{t.constant(std::span<const float>(zero.data(), 3), Shape{3}),
                               t.constant(std::span<const float>(zero.data() + 3, 3), Shape{3})};
    CHECK(t.scalar(epsilon_reg(t, zs)) == 0.0f);

    std::vector<float> e{1, 2, 3};
    auto leaf = t.leaf(e, Shape{3});
    std::array<Tape::Id, 1> one{leaf};
    auto reg = epsilon_reg(t, one);
    CHECK(t.scalar(reg) == doctest::Approx(14.0f));
    t.backward(reg);
    auto g = t.grad(leaf);
    CHECK(g[0] == 2.0f);
    CHECK(g[1] == 4.0f);
    CHECK(g[2] == 6.0f);

    // Random case against a direct summation oracle.
    Pcg32 rng(17);
    Tape t2;
    std::vector<Tape::Id> parts;
    double expect = 0;
    for (int i = 0; i < 10; ++i) {
        std::vector<float> v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        for (float x : v) expect += static_cast<double>(x) * x;
        parts.push_back(t2.constant(v, Shape{3}));
    }
    CHECK(t2.scalar(epsilon_reg(t2, parts)) == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("total loss composes the weighted terms") {
    Tape t;
    LossWeights w;
    auto zero = t.constant_scalar(0.0f);
    TotalLoss all_zero = total_loss(t, zero, zero, zero, zero, w);
    CHECK(t.scalar(all_zero.total) == 0.0f);

    // Only eps = (0.1,0,0) on one Gaussian with lambda_eps = 100 -> 1.0.
    std::vector<float> e{0.1f, 0, 0};
    std::array<Tape::Id, 1> eps{t.constant(e, Shape{3})};
    TotalLoss only_eps = total_loss(t, zero, Tape::kNone, Tape::kNone, epsilon_reg(t, eps), w);
    CHECK(t.scalar(only_eps.total) == doctest::Approx(1.0f).epsilon(1e-5));

    // Random values equal the manual weighted sum.
    Pcg32 rng(18);
    float vp = rng.uniform(0, 1), vc = rng.uniform(0, 1), va = rng.uniform(0, 1),
          ve = rng.uniform(0, 1);
    TotalLoss tl = total_loss(t, t.constant_scalar(vp), t.constant_scalar(vc),
                              t.constant_scalar(va), t.constant_scalar(ve), w);
    CHECK(t.scalar(tl.total) ==
          doctest::Approx(vp + w.lambda_cds * vc + w.lambda_ads * va + w.lambda_eps * ve)
              .epsilon(1e-5));
}

TEST_CASE("loss gradients match finite differences on 8x8 random maps") {
    // Directional FD along the tape gradient (plus mixtures); component-wise
    // f32 probing of the SSIM graph sits at the rounding floor.
    HostTensor observed = random_map(Shape{3, 8, 8}, 21);
    HostTensor pseudo = random_map(Shape{1, 8, 8}, 22);

    struct Case {
        const char* name;
        Shape shape;
        std::function<Tape::Id(Tape&, Tape::Id)> f;
    };
    LossWeights w;
    std::vector<Case> cases;
    cases.push_back({"photometric", Shape{3, 8, 8}, [&](Tape& t, Tape::Id x) {
                         return photometric_loss(t, x, t.constant(observed.data, observed.shape), w);
                     }});
    cases.push_back({"pearson", Shape{1, 8, 8}, [&](Tape& t, Tape::Id x) {
                         return pearson_depth_loss(t, t.constant(pseudo.data, pseudo.shape), x);
                     }});
    cases.push_back({"edge_aware", Shape{1, 8, 8}, [&](Tape& t, Tape::Id x) {
                         return edge_aware_smoothness(t, x, pseudo, observed);
                     }});
    cases.push_back({"eps_reg", Shape{3, 8, 8}, [&](Tape& t, Tape::Id x) {
                         return t.sum(t.mul(x, x)); // same form; epsilon_reg over a block
                     }});

    Pcg32 rng(23);
    for (size_t ci = 0; ci < cases.size(); ++ci) {
        auto& c = cases[ci];
        HostTensor x0 = random_map(c.shape, 500 + ci, 0.1f, 0.9f);
        if (std::string(c.name) == "edge_aware") {
            // |grad D| terms kink at zero differences; a ramp plus small noise
            // keeps every forward difference bounded away from the kink.
            Pcg32 er(901);
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    x0.at(0, y, x) = 0.08f * (x + y) + er.uniform(-0.02f, 0.02f);
        }
        Tape t0;
        auto in0 = t0.leaf(x0.data, c.shape);
        t0.backward(c.f(t0, in0));
        std::vector<float> g(t0.grad(in0).begin(), t0.grad(in0).end());
        double gn2 = 0;
        for (float v : g) gn2 += static_cast<double>(v) * v;
        const double gn = std::sqrt(gn2);
        REQUIRE(gn > 1e-4);

        float worst = 0;
        const float h = 1e-2f;
        for (int trial = 0; trial < 25; ++trial) {
            std::vector<float> u(g.size());
            double un2 = 0;
            for (float& v : u) {
                v = rng.uniform(-1, 1);
                un2 += static_cast<double>(v) * v;
            }
            const double un = std::sqrt(un2);
            const float mix = trial == 0 ? 0.0f : 0.4f;
            double ad = 0;
            for (size_t i = 0; i < u.size(); ++i) {
                u[i] = static_cast<float>((1 - mix) * g[i] / gn + mix * u[i] / un);
                ad += static_cast<double>(g[i]) * u[i];
            }
            std::vector<float> xp = x0.data;
            for (size_t i = 0; i < u.size(); ++i) xp[i] = x0.data[i] + h * u[i];
            Tape tp;
            const double fp = tp.scalar(c.f(tp, tp.leaf(xp, c.shape)));
            for (size_t i = 0; i < u.size(); ++i) xp[i] = x0.data[i] - h * u[i];
            Tape tm;
            const double fm = tm.scalar(c.f(tm, tm.leaf(xp, c.shape)));
            const double cd = (fp - fm) / (2.0 * h);
            worst = std::max(worst, static_cast<float>(std::abs(ad - cd) / (std::abs(cd) + 1e-6)));
        }
        INFO(c.name);
        CHECK(worst < 1e-3f);
    }
}
