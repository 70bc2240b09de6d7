#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/renderer.hpp"
#include "core/rng.hpp"

using namespace uwgs;

namespace {

CameraFrame basic_cam(int w = 100, int h = 100, float f = 100.0f) {
    CameraFrame cam;
    cam.width = w;
    cam.height = h;
    cam.fx = cam.fy = f;
    cam.cx = w * 0.5f;
    cam.cy = h * 0.5f;
    return cam;
}

GaussianAttrs<float> make_attrs(Vec3 pos, float log_scale, float opacity, Vec3 color) {
    GaussianAttrs<float> g;
    for (int k = 0; k < 3; ++k) {
        g.pos[k] = pos[k];
        g.log_scale[k] = log_scale;
        g.color[k] = color[k];
    }
    g.rot[0] = 1;
    g.rot[1] = g.rot[2] = g.rot[3] = 0;
    g.opacity_logit = logitf(opacity);
    return g;
}

} // namespace

TEST_CASE("projection: on-axis point lands on the principal point") {
    CameraFrame cam = basic_cam();
    cam.cx = cam.cy = 50;
    auto s = project_gaussian(make_attrs({0, 0, 1}, -3, 0.5f, {1, 0, 0}), cam);
    REQUIRE(s.has_value());
    CHECK(s->mean_x == doctest::Approx(50.0f));
    CHECK(s->mean_y == doctest::Approx(50.0f));
    CHECK(s->depth == doctest::Approx(1.0f));
}

TEST_CASE("projection: point behind the near plane is culled") {
    CameraFrame cam = basic_cam();
    CHECK_FALSE(project_gaussian(make_attrs({0, 0, -1.0f}, -3, 0.5f, {1, 0, 0}), cam).has_value());
    CHECK_FALSE(project_gaussian(make_attrs({0, 0, 0.005f}, -3, 0.5f, {1, 0, 0}), cam).has_value());
}

TEST_CASE("projection: isotropic covariance matches the symbolic Jacobian oracle") {
    // Sigma = s^2 I at distance d on-axis: cov2d = (f s / d)^2 I + 0.3 I.
    for (float d : {0.8f, 1.0f, 2.5f}) {
        for (float ls : {-4.0f, -3.0f, -2.2f}) {
            CameraFrame cam = basic_cam();
            auto s = project_gaussian(make_attrs({0, 0, d}, ls, 0.5f, {1, 1, 1}), cam);
            REQUIRE(s.has_value());
            const float sigma = std::exp(ls);
            const float expect = (cam.fx * sigma / d) * (cam.fx * sigma / d) + 0.3f;
            CHECK(s->cov_a == doctest::Approx(expect).epsilon(1e-4));
            CHECK(s->cov_c == doctest::Approx(expect).epsilon(1e-4));
            CHECK(s->cov_b == doctest::Approx(0.0f).epsilon(1e-5));
        }
    }
}

TEST_CASE("render: empty splat list over black is all zero") {
    RenderOutput out = render_plain({}, 8, 6, {0, 0, 0});
    for (float v : out.image.data) CHECK(v == 0.0f);
    for (float v : out.alpha.data) CHECK(v == 0.0f);
}

TEST_CASE("render: single centered splat composites as alpha * color") {
    CameraFrame cam = basic_cam(21, 21);
    cam.cx = cam.cy = 10;
    // Big flat splat so the center pixel sits at the Gaussian peak.
    auto g = make_attrs({0, 0, 1.0f}, -1.2f, 0.99f, {0.2f, 0.5f, 0.8f});
    auto s = project_gaussian(g, cam);
    REQUIRE(s.has_value());
    RenderOutput out = render_plain({*s}, 21, 21, {0, 0, 0});
    const float a = out.alpha.at(0, 10, 10);
    CHECK(a == doctest::Approx(0.99f).epsilon(1e-3));
    CHECK(out.image.at(0, 10, 10) == doctest::Approx(0.99f * 0.2f).epsilon(1e-3));
    CHECK(out.image.at(2, 10, 10) == doctest::Approx(0.99f * 0.8f).epsilon(1e-3));
    CHECK(out.depth.at(0, 10, 10) == doctest::Approx(1.0f).epsilon(1e-3));
}

TEST_CASE("render: two overlapping splats composite front-to-back") {
    CameraFrame cam = basic_cam(21, 21);
    cam.cx = cam.cy = 10;
    auto front = project_gaussian(make_attrs({0, 0, 1.0f}, -1.0f, 0.5f, {1, 0, 0}), cam);
    auto back = project_gaussian(make_attrs({0, 0, 2.0f}, -0.3f, 0.5f, {0, 1, 0}), cam);
    REQUIRE(front.has_value());
    REQUIRE(back.has_value());
    RenderOutput out = render_plain({*back, *front}, 21, 21, {0, 0, 0}); // input order reversed
    CHECK(out.image.at(0, 10, 10) == doctest::Approx(0.5f).epsilon(2e-3));
    CHECK(out.image.at(1, 10, 10) == doctest::Approx(0.25f).epsilon(2e-3));
    CHECK(out.alpha.at(0, 10, 10) == doctest::Approx(0.75f).epsilon(2e-3));
}

TEST_CASE("render: permutation of input order changes no pixel by more than 1e-6") {
    Pcg32 rng(9);
    CameraFrame cam = basic_cam(32, 24, 40);
    std::vector<Splat2D<float>> splats;
    for (int i = 0; i < 12; ++i) {
        auto g = make_attrs({rng.uniform(-0.4f, 0.4f), rng.uniform(-0.3f, 0.3f), rng.uniform(0.8f, 2.0f)},
                            rng.uniform(-3.0f, -1.5f), rng.uniform(0.2f, 0.9f),
                            {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
        auto s = project_gaussian(g, cam);
        if (s) {
            s->input_index = i;
            splats.push_back(*s);
        }
    }
    REQUIRE(splats.size() >= 8);
    RenderOutput a = render_plain(splats, 32, 24, {0, 0, 0});
    std::vector<Splat2D<float>> shuffled = splats;
    for (size_t i = 0; i + 1 < shuffled.size(); ++i)
        std::swap(shuffled[i], shuffled[i + rng.bounded(static_cast<uint32_t>(shuffled.size() - i))]);
    RenderOutput b = render_plain(shuffled, 32, 24, {0, 0, 0});
    for (size_t i = 0; i < a.image.data.size(); ++i)
        CHECK(std::fabs(a.image.data[i] - b.image.data[i]) <= 1e-6f);
    for (size_t i = 0; i < a.depth.data.size(); ++i)
        CHECK(std::fabs(a.depth.data[i] - b.depth.data[i]) <= 1e-6f);
}

TEST_CASE("render: alpha and transmittance stay in [0,1]") {
    Pcg32 rng(19);
    CameraFrame cam = basic_cam(24, 24, 30);
    std::vector<Splat2D<float>> splats;
    for (int i = 0; i < 30; ++i) {
        auto g = make_attrs({rng.uniform(-0.5f, 0.5f), rng.uniform(-0.5f, 0.5f), rng.uniform(0.5f, 2.0f)},
                            rng.uniform(-2.5f, -1.0f), rng.uniform(0.5f, 0.999f),
                            {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
        auto s = project_gaussian(g, cam);
        if (s) splats.push_back(*s);
    }
    RenderOutput out = render_plain(splats, 24, 24, {0, 0, 0});
    for (float v : out.alpha.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("render: disjoint far-apart splats equal the sum of single-splat renders") {
    CameraFrame cam = basic_cam(64, 32, 30);
    std::vector<Splat2D<float>> splats;
    std::vector<Vec3> centers{{-0.7f, 0, 1.0f}, {0.0f, 0, 1.0f}, {0.7f, 0, 1.0f}};
    for (int i = 0; i < 3; ++i) {
        Vec3 color{i == 0 ? 1.0f : 0.0f, i == 1 ? 1.0f : 0.0f, i == 2 ? 1.0f : 0.0f};
        auto s = project_gaussian(make_attrs(centers[i], -3.2f, 0.9f, color), cam);
        REQUIRE(s.has_value());
        splats.push_back(*s);
    }
    RenderOutput all = render_plain(splats, 64, 32, {0, 0, 0});
    HostTensor sum(Shape{3, 32, 64});
    for (const auto& s : splats) {
        RenderOutput one = render_plain({s}, 64, 32, {0, 0, 0});
        for (size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += one.image.data[i];
    }
    for (size_t i = 0; i < sum.data.size(); ++i)
        CHECK(std::fabs(all.image.data[i] - sum.data[i]) <= 1e-6f);
}

TEST_CASE("tape and plain renders agree bit-for-bit on values") {
    Pcg32 rng(77);
    CameraFrame cam = basic_cam(20, 16, 24);
    std::vector<Splat2D<float>> plain;
    Tape t;
    std::vector<Splat2D<Expr>> taped;
    for (int i = 0; i < 8; ++i) {
        GaussianAttrs<float> g = make_attrs(
            {rng.uniform(-0.4f, 0.4f), rng.uniform(-0.3f, 0.3f), rng.uniform(0.7f, 1.8f)},
            rng.uniform(-2.6f, -1.4f), rng.uniform(0.3f, 0.95f),
            {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
        GaussianAttrs<Expr> ge;
        auto lift = [&](float v) { return Expr{&t, t.leaf(std::span<const float>(&v, 1), Shape{1})}; };
        for (int k = 0; k < 3; ++k) {
            ge.pos[k] = lift(g.pos[k]);
            ge.log_scale[k] = lift(g.log_scale[k]);
            ge.color[k] = lift(g.color[k]);
        }
        for (int k = 0; k < 4; ++k) ge.rot[k] = lift(g.rot[k]);
        ge.opacity_logit = lift(g.opacity_logit);
        auto sp = project_gaussian(g, cam);
        auto se = project_gaussian(ge, cam);
        REQUIRE(sp.has_value() == se.has_value());
        if (sp) {
            plain.push_back(*sp);
            taped.push_back(*se);
        }
    }
    RenderOutput po = render_plain(plain, 20, 16, {0, 0, 0});
    RenderTapeOutput to = render_tape(t, taped, 20, 16, {0, 0, 0});
    auto timg = t.val(to.image);
    auto tdep = t.val(to.depth);
    auto talp = t.val(to.alpha);
    for (size_t i = 0; i < po.image.data.size(); ++i) CHECK(po.image.data[i] == timg[i]);
    for (size_t i = 0; i < po.depth.data.size(); ++i) CHECK(po.depth.data[i] == tdep[i]);
    for (size_t i = 0; i < po.alpha.data.size(); ++i) CHECK(po.alpha.data[i] == talp[i]);
}

TEST_CASE("renderer gradients match finite differences away from boundaries") {
    // Small scene with splats whose 3-sigma boxes stay strictly inside the
    // image (a box crossing the frame edge is a genuine kink of the forward
    // function); loss = mean of the image, rel err < 1e-2.
    Pcg32 rng(123);
    CameraFrame cam = basic_cam(20, 16, 18);

    auto build = [&](Tape& t, const std::vector<float>& v) {
        // v packs 2 gaussians x (pos3, log_scale3, rot4, opacity1, color3).
        std::vector<Splat2D<Expr>> splats;
        for (int i = 0; i < 2; ++i) {
            const float* p = v.data() + i * 14;
            GaussianAttrs<Expr> g;
            auto lift = [&](float x) {
                return Expr{&t, t.constant(std::span<const float>(&x, 1), Shape{1})};
            };
            (void)lift;
            for (int k = 0; k < 3; ++k)
                g.pos[k] = Expr{&t, t.constant(std::span<const float>(p + k, 1), Shape{1})};
            for (int k = 0; k < 3; ++k)
                g.log_scale[k] = Expr{&t, t.constant(std::span<const float>(p + 3 + k, 1), Shape{1})};
            for (int k = 0; k < 4; ++k)
                g.rot[k] = Expr{&t, t.constant(std::span<const float>(p + 6 + k, 1), Shape{1})};
            g.opacity_logit = Expr{&t, t.constant(std::span<const float>(p + 10, 1), Shape{1})};
            for (int k = 0; k < 3; ++k)
                g.color[k] = Expr{&t, t.constant(std::span<const float>(p + 11 + k, 1), Shape{1})};
            auto s = project_gaussian(g, cam);
            REQUIRE(s.has_value());
            splats.push_back(*s);
        }
        auto out = render_tape(t, splats, cam.width, cam.height, {0, 0, 0});
        return t.mean(out.image);
    };
    (void)build;

    // Big soft anisotropic splats whose footprint covers the whole image with
    // alpha >= 1/255 everywhere: the recorded pixel set is then constant under
    // the FD perturbations and the forward map is smooth.
    std::vector<float> x;
    for (int i = 0; i < 2; ++i) {
        x.push_back(0.03f + 0.05f * i); // pos
        x.push_back(-0.02f + 0.03f * i);
        x.push_back(1.0f + 0.25f * i);
        x.push_back(-1.05f); // log_scale, distinctly anisotropic
        x.push_back(-1.3f);
        x.push_back(-1.55f);
        x.push_back(0.9f); // quaternion, deliberately unnormalized
        x.push_back(0.1f + 0.05f * i);
        x.push_back(-0.15f);
        x.push_back(0.2f);
        x.push_back(2.2f); // opacity logit (~0.9)
        x.push_back(0.6f); // colors
        x.push_back(0.3f);
        x.push_back(0.8f);
    }

    // Sign-varying pixel weights keep per-attribute gradients well above the
    // forward jumps caused by pixels crossing the 1/255 skip threshold.
    std::vector<float> weights(static_cast<size_t>(3 * cam.width * cam.height));
    for (float& w : weights) w = rng.uniform(0.25f, 1.0f) * (rng.next_float() < 0.5f ? -1.0f : 1.0f);

    auto f = [&](Tape& t, Tape::Id in) {
        std::vector<Splat2D<Expr>> splats;
        for (int i = 0; i < 2; ++i) {
            GaussianAttrs<Expr> g;
            for (int k = 0; k < 3; ++k) g.pos[k] = Expr{&t, t.slice(in, i * 14 + k, 1)};
            for (int k = 0; k < 3; ++k) g.log_scale[k] = Expr{&t, t.slice(in, i * 14 + 3 + k, 1)};
            for (int k = 0; k < 4; ++k) g.rot[k] = Expr{&t, t.slice(in, i * 14 + 6 + k, 1)};
            g.opacity_logit = Expr{&t, t.slice(in, i * 14 + 10, 1)};
            for (int k = 0; k < 3; ++k) g.color[k] = Expr{&t, t.slice(in, i * 14 + 11 + k, 1)};
            auto s = project_gaussian(g, cam);
            if (s) splats.push_back(*s);
        }
        auto out = render_tape(t, splats, cam.width, cam.height, {0, 0, 0});
        Tape::Id w = t.constant(weights, t.shape(out.image));
        return t.mean(t.mul(out.image, w));
    };

    Tape tape;
    auto in = tape.leaf(x, Shape{28});
    tape.backward(f(tape, in));
    std::vector<float> ad(tape.grad(in).begin(), tape.grad(in).end());

    float worst = 0;
    int checked = 0;
    const float h = 1e-2f;
    for (size_t i = 0; i < x.size(); ++i) {
        std::vector<float> xp = x;
        const float x0 = xp[i];
        const float xhi = x0 + h, xlo = x0 - h;
        xp[i] = xhi;
        Tape t1;
        const double fp = t1.scalar(f(t1, t1.leaf(xp, Shape{28})));
        xp[i] = xlo;
        Tape t2;
        const double fm = t2.scalar(f(t2, t2.leaf(xp, Shape{28})));
        const double cd = (fp - fm) / (static_cast<double>(xhi) - xlo);
        if (std::fabs(cd) < 3e-4) continue; // below f32 FD resolution at this scale
        worst = std::max(worst, static_cast<float>(std::fabs(ad[i] - cd) / (std::fabs(cd) + 1e-6)));
        ++checked;
    }
    CHECK(checked >= 20); // position, scale, rotation, opacity and color all covered
    CHECK(worst < 1e-2f);
}
