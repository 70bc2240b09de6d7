// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#include "metrics.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "losses.hpp"
#include "png_io.hpp"
#include "renderer.hpp"

namespace uwgs {

float psnr(const HostTensor& a, const HostTensor& b) {
    require(a.shape == b.shape, "psnr: shape mismatch");
    double mse = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse <= 0) return 99.0f;
    return std::min(99.0f, static_cast<float>(-10.0 * std::log10(mse)));
}

float ssim_value(const HostTensor& a, const HostTensor& b) {
    Tape t;
    Tape::Id ia = t.constant(a.data, a.shape);
    Tape::Id ib = t.constant(b.data, b.shape);
    return t.scalar(ssim(t, ia, ib));
}

namespace {
inline float deg(float rad) { return rad * 57.29577951308232f; }
inline float rad(float d) { return d * 0.017453292519943295f; }
} // namespace

float ciede2000(float l1, float a1, float b1, float l2, float a2, float b2) {
    const double C1 = std::sqrt(static_cast<double>(a1) * a1 + static_cast<double>(b1) * b1);
    const double C2 = std::sqrt(static_cast<double>(a2) * a2 + static_cast<double>(b2) * b2);
    const double Cbar = 0.5 * (C1 + C2);
    const double Cbar7 = std::pow(Cbar, 7.0);
    const double G = 0.5 * (1.0 - std::sqrt(Cbar7 / (Cbar7 + std::pow(25.0, 7.0))));
    const double ap1 = (1.0 + G) * a1;
    const double ap2 = (1.0 + G) * a2;
    const double Cp1 = std::sqrt(ap1 * ap1 + static_cast<double>(b1) * b1);
    const double Cp2 = std::sqrt(ap2 * ap2 + static_cast<double>(b2) * b2);
    auto hp = [](double ap, double b) {
        if (ap == 0 && b == 0) return 0.0;
        double h = std::atan2(b, ap) * 180.0 / M_PI;
        return h < 0 ? h + 360.0 : h;
    };
    const double hp1 = hp(ap1, b1);
    const double hp2 = hp(ap2, b2);

    const double dL = static_cast<double>(l2) - l1;
    const double dC = Cp2 - Cp1;
    // Ties at the +-180 hue boundary resolve into the |dh| <= 180 branch; a
    // one-ulp atan2 asymmetry must not flip the rotation term's sign.
    constexpr double kHueTol = 1e-9;
    double dhp;
    if (Cp1 * Cp2 == 0) {
        dhp = 0;
    } else {
        dhp = hp2 - hp1;
        if (dhp > 180 + kHueTol)
            dhp -= 360;
        else if (dhp < -(180 + kHueTol))
            dhp += 360;
    }
    const double dH = 2.0 * std::sqrt(Cp1 * Cp2) * std::sin(dhp * M_PI / 360.0);

    const double Lbar = 0.5 * (l1 + l2);
    const double Cpbar = 0.5 * (Cp1 + Cp2);
    double hbar;
    if (Cp1 * Cp2 == 0) {
        hbar = hp1 + hp2;
    } else {
        const double diff = std::fabs(hp1 - hp2);
        if (diff <= 180 + kHueTol)
            hbar = 0.5 * (hp1 + hp2);
        else if (hp1 + hp2 < 360)
            hbar = 0.5 * (hp1 + hp2 + 360);
        else
            hbar = 0.5 * (hp1 + hp2 - 360);
    }
    const double T = 1.0 - 0.17 * std::cos((hbar - 30.0) * M_PI / 180.0) +
                     0.24 * std::cos(2.0 * hbar * M_PI / 180.0) +
                     0.32 * std::cos((3.0 * hbar + 6.0) * M_PI / 180.0) -
                     0.20 * std::cos((4.0 * hbar - 63.0) * M_PI / 180.0);
    const double dtheta = 30.0 * std::exp(-((hbar - 275.0) / 25.0) * ((hbar - 275.0) / 25.0));
    const double Cpbar7 = std::pow(Cpbar, 7.0);
    const double RC = 2.0 * std::sqrt(Cpbar7 / (Cpbar7 + std::pow(25.0, 7.0)));
    const double Lm50 = (Lbar - 50.0) * (Lbar - 50.0);
    const double SL = 1.0 + 0.015 * Lm50 / std::sqrt(20.0 + Lm50);
    const double SC = 1.0 + 0.045 * Cpbar;
    const double SH = 1.0 + 0.015 * Cpbar * T;
    const double RT = -std::sin(2.0 * dtheta * M_PI / 180.0) * RC;

    const double tl = dL / SL;
    const double tc = dC / SC;
    const double th = dH / SH;
    return static_cast<float>(std::sqrt(tl * tl + tc * tc + th * th + RT * tc * th));
}

void srgb_to_lab(float r, float g, float b, float& L, float& A, float& B) {
    auto lin = [](float c) {
        return c <= 0.04045f ? c / 12.92f : std::pow((c + 0.055f) / 1.055f, 2.4f);
    };
    const float rl = lin(clampf(r, 0, 1)), gl = lin(clampf(g, 0, 1)), bl = lin(clampf(b, 0, 1));
    // sRGB D65 primaries.
    const float X = 0.4124564f * rl + 0.3575761f * gl + 0.1804375f * bl;
    const float Y = 0.2126729f * rl + 0.7151522f * gl + 0.0721750f * bl;
    const float Z = 0.0193339f * rl + 0.1191920f * gl + 0.9503041f * bl;
    auto f = [](float t) {
        constexpr float d3 = 6.0f / 29.0f * 6.0f / 29.0f * 6.0f / 29.0f;
        return t > d3 ? std::cbrt(t) : t / (3.0f * (6.0f / 29.0f) * (6.0f / 29.0f)) + 4.0f / 29.0f;
    };
    const float fx = f(X / 0.95047f), fy = f(Y), fz = f(Z / 1.08883f);
    L = 116.0f * fy - 16.0f;
    A = 500.0f * (fx - fy);
    B = 200.0f * (fy - fz);
}

float mean_ciede2000(const HostTensor& a, const HostTensor& b) {
    require(a.shape == b.shape && a.channels() == 3, "mean_ciede2000: need matching [3,H,W]");
    const int64_t hw = static_cast<int64_t>(a.height()) * a.width();
    double acc = 0;
    for (int64_t i = 0; i < hw; ++i) {
        float l1, a1, b1, l2, a2, b2;
        srgb_to_lab(a.data[i], a.data[hw + i], a.data[2 * hw + i], l1, a1, b1);
        srgb_to_lab(b.data[i], b.data[hw + i], b.data[2 * hw + i], l2, a2, b2);
        acc += ciede2000(l1, a1, b1, l2, a2, b2);
    }
    return static_cast<float>(acc / static_cast<double>(hw));
}

float angular_error_deg(const HostTensor& a, const HostTensor& b) {
    require(a.shape == b.shape && a.channels() == 3, "angular_error: need matching [3,H,W]");
    const int64_t hw = static_cast<int64_t>(a.height()) * a.width();
    double acc = 0;
    for (int64_t i = 0; i < hw; ++i) {
        const float ax = a.data[i], ay = a.data[hw + i], az = a.data[2 * hw + i];
        const float bx = b.data[i], by = b.data[hw + i], bz = b.data[2 * hw + i];
        const float na = std::sqrt(ax * ax + ay * ay + az * az);
        const float nb = std::sqrt(bx * bx + by * by + bz * bz);
        if (na < 1e-6f && nb < 1e-6f) continue; // both black
        const float dot = ax * bx + ay * by + az * bz;
        const float c = clampf(dot / ((na + 1e-8f) * (nb + 1e-8f)), -1.0f, 1.0f);
        acc += deg(std::acos(c));
    }
    return static_cast<float>(acc / static_cast<double>(hw));
}

float pearson(const HostTensor& a, const HostTensor& b) {
    require(a.data.size() == b.data.size() && a.data.size() >= 2, "pearson: size mismatch");
    double ma = 0, mb = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        ma += a.data[i];
        mb += b.data[i];
    }
    ma /= static_cast<double>(a.data.size());
    mb /= static_cast<double>(b.data.size());
    double cov = 0, va = 0, vb = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double da = a.data[i] - ma, db = b.data[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    return static_cast<float>(cov / ((std::sqrt(va) + 1e-12) * (std::sqrt(vb) + 1e-12)));
}

EvalReport evaluate(const Checkpoint& ckpt, const Dataset& ds, EvalMode mode,
                    const std::string& panel_dir) {
    EvalReport rep;
    rep.scene = ds.manifest.name;
    rep.mode = mode == EvalMode::Intrinsic ? "intrinsic" : "degraded_with_water";
    rep.checkpoint_step = ckpt.step;
    auto test = ds.split(true);
    require(!test.empty(), "evaluate: dataset has no test split");

    if (!panel_dir.empty()) std::filesystem::create_directories(panel_dir);

    for (const LoadedFrame* f : test) {
        const CameraFrame& cam = f->camera;
        HostTensor reference;
        RenderOutput ro;
        if (mode == EvalMode::Intrinsic) {
            require(f->clean.data.size() > 0, "evaluate: dataset lacks clean ground truth");
            ro = render_cloud(ckpt.cloud, cam, {0, 0, 0});
            reference = f->clean;
        } else {
            WaterParams w;
            if (!ckpt.water_history.empty()) {
                w = ckpt.water_history[std::min<size_t>(cam.t, ckpt.water_history.size() - 1)];
            } else {
                require(ds.manifest.water.has_value(), "evaluate: no water source available");
                w = *ds.manifest.water;
            }
            std::vector<float> colors(ckpt.cloud.size() * 3);
            for (size_t i = 0; i < ckpt.cloud.size(); ++i) {
                const float r = viewpoint_distance(ckpt.cloud.position(i), cam);
                const Vec3 c = degrade_color(ckpt.cloud.intrinsic_color(i), w, r, {0, 0, 0});
                for (int k = 0; k < 3; ++k) colors[i * 3 + k] = c[k];
            }
            ro = render_cloud(ckpt.cloud, cam, {0, 0, 0}, &colors);
            reference = cam.degraded_image;
        }
        HostTensor rendered = ro.image;
        for (float& v : rendered.data) v = clampf(v, 0.0f, 1.0f);

        FrameEval fe;
        fe.t = cam.t;
        fe.psnr = psnr(rendered, reference);
        fe.ssim = ssim_value(rendered, reference);
        fe.de00 = mean_ciede2000(rendered, reference);
        fe.psi_deg = angular_error_deg(rendered, reference);
        rep.frames.push_back(fe);

        if (!panel_dir.empty()) {
            // Side-by-side panel: observed | rendered | reference.
            const int H = reference.height(), W = reference.width();
            HostTensor panel(Shape{3, H, W * 3});
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x) {
                        panel.at(c, y, x) = cam.degraded_image.data.empty()
                                                ? 0.0f
                                                : cam.degraded_image.at(c, y, x);
                        panel.at(c, y, W + x) = rendered.at(c, y, x);
                        panel.at(c, y, 2 * W + x) = reference.at(c, y, x);
                    }
            char name[64];
            std::snprintf(name, sizeof(name), "/panel_t%04d.png", cam.t);
            write_png_rgb8(panel_dir + name, panel);
        }
    }

    for (const FrameEval& fe : rep.frames) {
        rep.mean_psnr += fe.psnr;
        rep.mean_ssim += fe.ssim;
        rep.mean_de00 += fe.de00;
        rep.mean_psi += fe.psi_deg;
    }
    const float n = static_cast<float>(rep.frames.size());
    rep.mean_psnr /= n;
    rep.mean_ssim /= n;
    rep.mean_de00 /= n;
    rep.mean_psi /= n;
    return rep;
}

void write_report_json(const EvalReport& rep, const std::string& path) {
    nlohmann::json j;
    j["scene"] = rep.scene;
    j["mode"] = rep.mode;
    j["checkpoint_step"] = rep.checkpoint_step;
    j["aggregate"] = {{"psnr", rep.mean_psnr},
                      {"ssim", rep.mean_ssim},
                      {"ciede2000", rep.mean_de00},
                      {"angular_error_deg", rep.mean_psi}};
    j["frames"] = nlohmann::json::array();
    for (const FrameEval& f : rep.frames)
        j["frames"].push_back({{"t", f.t},
                               {"psnr", f.psnr},
                               {"ssim", f.ssim},
                               {"ciede2000", f.de00},
                               {"angular_error_deg", f.psi_deg}});
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path);
    out << j.dump(2) << "\n";
}

} // namespace uwgs
