// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#include "uwgs.h"

#include <json.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "core/checkpoint.hpp"
#include "core/colmap.hpp"
#include "core/datasets.hpp"
#include "core/metrics.hpp"
#include "core/png_io.hpp"
#include "core/renderer.hpp"
#include "core/train.hpp"

namespace {

thread_local std::string g_last_error;

uwgs_status fail(uwgs_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

// Maps the C++ error taxonomy onto C status codes.
template <class Fn>
uwgs_status guarded(Fn&& fn) {
    try {
        fn();
        return UWGS_OK;
    } catch (const uwgs::ParseError& e) {
        return fail(UWGS_ERR_PARSE, e.what());
    } catch (const uwgs::IoError& e) {
        return fail(UWGS_ERR_IO, e.what());
    } catch (const uwgs::NumericError& e) {
        return fail(UWGS_ERR_NUMERIC, e.what());
    } catch (const uwgs::InvalidArgument& e) {
        return fail(UWGS_ERR_INVALID, e.what());
    } catch (const std::exception& e) {
        return fail(UWGS_ERR_INTERNAL, e.what());
    }
}

uwgs::WaterParams water_from9(const float* w9) {
    uwgs::WaterParams w;
    for (int k = 0; k < 3; ++k) {
        w.ambient[k] = w9[k];
        w.attenuation[k] = w9[3 + k];
        w.backscatter[k] = w9[6 + k];
    }
    return w;
}

std::vector<float> degraded_colors(const uwgs::Checkpoint& ck, const uwgs::CameraFrame& cam,
                                   const uwgs::WaterParams& w) {
    std::vector<float> colors(ck.cloud.size() * 3);
    for (size_t i = 0; i < ck.cloud.size(); ++i) {
        const float r = uwgs::viewpoint_distance(ck.cloud.position(i), cam);
        const uwgs::Vec3 c = uwgs::degrade_color(ck.cloud.intrinsic_color(i), w, r, {0, 0, 0});
        for (int k = 0; k < 3; ++k) colors[i * 3 + k] = c[k];
    }
    return colors;
}

} // namespace

struct uwgs_checkpoint {
    uwgs::Checkpoint ck;
};

extern "C" {

const char* uwgs_status_str(uwgs_status s) {
    switch (s) {
    case UWGS_OK: return "ok";
    case UWGS_ERR_INVALID: return "invalid argument";
    case UWGS_ERR_IO: return "i/o error";
    case UWGS_ERR_PARSE: return "parse error";
    case UWGS_ERR_NUMERIC: return "numeric failure";
    case UWGS_ERR_INTERNAL: return "internal error";
    }
    return "unknown";
}

const char* uwgs_last_error(void) { return g_last_error.c_str(); }

uint32_t uwgs_version(void) { return 100; }

uwgs_status uwgs_synth_dataset(const char* spec_json_path, const char* out_dir,
                               const char* overrides_json, int threads) {
    if (!spec_json_path || !out_dir) return fail(UWGS_ERR_INVALID, "null argument");
    return guarded([&] {
        uwgs::SyntheticSceneSpec spec = uwgs::load_scene_spec(spec_json_path);
        if (overrides_json && overrides_json[0]) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(overrides_json);
            } catch (const nlohmann::json::exception& e) {
                throw uwgs::ParseError(std::string("overrides: ") + e.what());
            }
            if (j.contains("frames")) spec.frames = j["frames"].get<int>();
            if (j.contains("width")) spec.width = j["width"].get<int>();
            if (j.contains("height")) spec.height = j["height"].get<int>();
            if (j.contains("seed")) spec.seed = j["seed"].get<uint64_t>();
            if (j.contains("gaussian_count")) spec.gaussian_count = j["gaussian_count"].get<int>();
            if (j.contains("caustics_enabled")) spec.caustics_enabled = j["caustics_enabled"].get<bool>();
            if (j.contains("pseudo_depth_noise"))
                spec.pseudo_depth_noise = j["pseudo_depth_noise"].get<float>();
            uwgs::require(spec.frames >= 2, "overrides: frames must be >= 2");
        }
        uwgs::generate_dataset(spec, out_dir, threads < 1 ? 1 : threads);
    });
}

uwgs_status uwgs_train(const char* data_dir, const char* out_dir, const char* config_json,
                       char* final_ckpt_path, size_t path_cap) {
    if (!data_dir || !out_dir) return fail(UWGS_ERR_INVALID, "null argument");
    return guarded([&] {
        uwgs::TrainConfig cfg = uwgs::parse_train_config(config_json ? config_json : "");
        uwgs::Dataset ds = uwgs::load_dataset(data_dir);
        uwgs::TrainResult res = uwgs::train(ds, cfg, out_dir);
        if (final_ckpt_path && path_cap > 0) {
            std::strncpy(final_ckpt_path, res.checkpoint_path.c_str(), path_cap - 1);
            final_ckpt_path[path_cap - 1] = '\0';
        }
    });
}

uwgs_status uwgs_checkpoint_open(const char* ply_path, uwgs_checkpoint** out) {
    if (!ply_path || !out) return fail(UWGS_ERR_INVALID, "null argument");
    *out = nullptr;
    return guarded([&] {
        auto* h = new uwgs_checkpoint{uwgs::load_checkpoint(ply_path)};
        *out = h;
    });
}

void uwgs_checkpoint_close(uwgs_checkpoint* ckpt) { delete ckpt; }

uwgs_status uwgs_checkpoint_num_gaussians(const uwgs_checkpoint* ckpt, int64_t* out) {
    if (!ckpt || !out) return fail(UWGS_ERR_INVALID, "null argument");
    *out = static_cast<int64_t>(ckpt->ck.cloud.size());
    return UWGS_OK;
}

uwgs_status uwgs_checkpoint_average_water(const uwgs_checkpoint* ckpt, float out9[9]) {
    if (!ckpt || !out9) return fail(UWGS_ERR_INVALID, "null argument");
    return guarded([&] {
        const uwgs::WaterParams w = ckpt->ck.average_water();
        for (int k = 0; k < 3; ++k) {
            out9[k] = w.ambient[k];
            out9[3 + k] = w.attenuation[k];
            out9[6 + k] = w.backscatter[k];
        }
    });
}

uwgs_status uwgs_render_views(const uwgs_checkpoint* ckpt, const char* cameras_src,
                              const char* mode, const float* water9, const char* out_dir) {
    if (!ckpt || !cameras_src || !mode || !out_dir) return fail(UWGS_ERR_INVALID, "null argument");
    const std::string m = mode;
    if (m != "intrinsic" && m != "underwater")
        return fail(UWGS_ERR_INVALID, "mode must be 'intrinsic' or 'underwater'");
    return guarded([&] {
        std::vector<uwgs::CameraFrame> cams;
        namespace fs = std::filesystem;
        if (fs::exists(std::string(cameras_src) + "/manifest.json")) {
            uwgs::DatasetManifest man = uwgs::read_manifest(cameras_src);
            for (const auto& f : man.frames) cams.push_back(f.camera);
        } else if (fs::exists(std::string(cameras_src) + "/cameras.txt")) {
            cams = uwgs::load_colmap(cameras_src).cameras;
        } else {
            throw uwgs::IoError(std::string("no manifest.json or cameras.txt under ") + cameras_src);
        }
        uwgs::require(!cams.empty(), "camera source is empty");

        uwgs::WaterParams w;
        if (m == "underwater") w = water9 ? water_from9(water9) : ckpt->ck.average_water();

        fs::create_directories(out_dir);
        for (const uwgs::CameraFrame& cam : cams) {
            uwgs::RenderOutput ro;
            if (m == "intrinsic") {
                ro = uwgs::render_cloud(ckpt->ck.cloud, cam, {0, 0, 0});
            } else {
                auto colors = degraded_colors(ckpt->ck, cam, w);
                ro = uwgs::render_cloud(ckpt->ck.cloud, cam, {0, 0, 0}, &colors);
            }
            char name[64];
            std::snprintf(name, sizeof(name), "/render_%04d.png", cam.t);
            uwgs::write_png_rgb8(std::string(out_dir) + name, ro.image);
        }
    });
}

uwgs_status uwgs_render_view(const uwgs_checkpoint* ckpt, const float camera18[18],
                             const char* mode, const float* water9, float* rgb, float* depth,
                             float* alpha) {
    if (!ckpt || !camera18 || !mode) return fail(UWGS_ERR_INVALID, "null argument");
    const std::string m = mode;
    if (m != "intrinsic" && m != "underwater")
        return fail(UWGS_ERR_INVALID, "mode must be 'intrinsic' or 'underwater'");
    return guarded([&] {
        uwgs::CameraFrame cam;
        cam.fx = camera18[0];
        cam.fy = camera18[1];
        cam.cx = camera18[2];
        cam.cy = camera18[3];
        cam.width = static_cast<int>(camera18[4]);
        cam.height = static_cast<int>(camera18[5]);
        for (int k = 0; k < 9; ++k) cam.rotation[k] = camera18[6 + k];
        for (int k = 0; k < 3; ++k) cam.translation[k] = camera18[15 + k];
        uwgs::require(cam.width > 0 && cam.height > 0, "camera size must be positive");

        uwgs::RenderOutput ro;
        if (m == "intrinsic") {
            ro = uwgs::render_cloud(ckpt->ck.cloud, cam, {0, 0, 0});
        } else {
            const uwgs::WaterParams w = water9 ? water_from9(water9) : ckpt->ck.average_water();
            auto colors = degraded_colors(ckpt->ck, cam, w);
            ro = uwgs::render_cloud(ckpt->ck.cloud, cam, {0, 0, 0}, &colors);
        }
        if (rgb) std::memcpy(rgb, ro.image.data.data(), ro.image.data.size() * sizeof(float));
        if (depth) std::memcpy(depth, ro.depth.data.data(), ro.depth.data.size() * sizeof(float));
        if (alpha) std::memcpy(alpha, ro.alpha.data.data(), ro.alpha.data.size() * sizeof(float));
    });
}

uwgs_status uwgs_evaluate(const uwgs_checkpoint* ckpt, const char* data_dir, const char* mode,
                          const char* report_json_path, const char* panel_dir) {
    if (!ckpt || !data_dir || !mode || !report_json_path)
        return fail(UWGS_ERR_INVALID, "null argument");
    const std::string m = mode;
    if (m != "intrinsic" && m != "degraded")
        return fail(UWGS_ERR_INVALID, "mode must be 'intrinsic' or 'degraded'");
    return guarded([&] {
        uwgs::Dataset ds = uwgs::load_dataset(data_dir);
        uwgs::EvalReport rep =
            uwgs::evaluate(ckpt->ck, ds,
                           m == "intrinsic" ? uwgs::EvalMode::Intrinsic
                                            : uwgs::EvalMode::DegradedWithWater,
                           panel_dir ? panel_dir : "");
        for (const uwgs::FrameEval& f : rep.frames)
            if (!std::isfinite(f.psnr) || !std::isfinite(f.ssim) || !std::isfinite(f.de00) ||
                !std::isfinite(f.psi_deg))
                throw uwgs::NumericError("NaN metric in evaluation report");
        uwgs::write_report_json(rep, report_json_path);
    });
}

} // extern "C"
