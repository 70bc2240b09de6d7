// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#include "train.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "colmap.hpp"
#include "renderer.hpp"
#include "rng.hpp"

namespace uwgs {

using nlohmann::json;

TrainConfig parse_train_config(const std::string& json_text) {
    TrainConfig cfg;
    if (json_text.empty()) return cfg;
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("train config: ") + e.what());
    }
    try {
        if (j.contains("stages")) {
            auto s = j["stages"];
            require(s.is_array() && s.size() == 3, "train config: stages must be [s1,s2,s3]");
            cfg.stages = {s[0].get<int>(), s[1].get<int>(), s[2].get<int>()};
        }
        if (j.contains("loss_weights")) {
            auto w = j["loss_weights"];
            cfg.weights.lambda1 = w.value("lambda1", cfg.weights.lambda1);
            cfg.weights.lambda2 = w.value("lambda2", cfg.weights.lambda2);
            cfg.weights.lambda_cds = w.value("lambda_cds", cfg.weights.lambda_cds);
            cfg.weights.lambda_ads = w.value("lambda_ads", cfg.weights.lambda_ads);
            cfg.weights.lambda_eps = w.value("lambda_eps", cfg.weights.lambda_eps);
        }
        cfg.seed = j.value("seed", cfg.seed);
        cfg.checkpoint_interval = j.value("checkpoint_interval", cfg.checkpoint_interval);
        cfg.max_gaussians = j.value("max_gaussians", cfg.max_gaussians);
        cfg.sdm.hash_log2 = j.value("hash_log2", cfg.sdm.hash_log2);
        cfg.sdm.net_res = j.value("net_res", cfg.sdm.net_res);
        cfg.lr_sdm_start = j.value("lr_sdm_start", cfg.lr_sdm_start);
        cfg.lr_sdm_end = j.value("lr_sdm_end", cfg.lr_sdm_end);
        cfg.lr_ibf_start = j.value("lr_ibf_start", cfg.lr_ibf_start);
        cfg.lr_ibf_end = j.value("lr_ibf_end", cfg.lr_ibf_end);
        cfg.ibf_warmup = j.value("ibf_warmup", cfg.ibf_warmup);
        cfg.lr_hash_start = j.value("lr_hash_start", cfg.lr_hash_start);
        cfg.lr_hash_end = j.value("lr_hash_end", cfg.lr_hash_end);
        cfg.lr_position_start = j.value("lr_position_start", cfg.lr_position_start);
        cfg.lr_position_end = j.value("lr_position_end", cfg.lr_position_end);
        cfg.lr_color = j.value("lr_color", cfg.lr_color);
        cfg.lr_opacity = j.value("lr_opacity", cfg.lr_opacity);
        cfg.lr_scale = j.value("lr_scale", cfg.lr_scale);
        cfg.lr_rotation = j.value("lr_rotation", cfg.lr_rotation);
        if (j.contains("background")) {
            auto b = j["background"];
            cfg.background = {b[0].get<float>(), b[1].get<float>(), b[2].get<float>()};
        }
        if (j.contains("ablate")) {
            const std::string a = j["ablate"].get<std::string>();
            if (a == "no-sd")
                cfg.no_sd = true;
            else if (a == "no-td")
                cfg.no_td = true;
            else if (a == "no-td-sd")
                cfg.no_sd = cfg.no_td = true;
            else if (a == "no-dgg")
                cfg.no_dgg = true;
            else if (a == "no-eps-reg")
                cfg.no_eps_reg = true;
            else if (a == "no-ms")
                cfg.no_ms = true;
            else if (!a.empty())
                throw ParseError("unknown ablation: " + a);
        }
        cfg.threads = j.value("threads", cfg.threads);
    } catch (const json::exception& e) {
        throw ParseError(std::string("train config: ") + e.what());
    }
    return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["stages"] = {cfg.stages.stage1, cfg.stages.stage2, cfg.stages.stage3};
    j["loss_weights"] = {{"lambda1", cfg.weights.lambda1},
                         {"lambda2", cfg.weights.lambda2},
                         {"lambda_cds", cfg.weights.lambda_cds},
                         {"lambda_ads", cfg.weights.lambda_ads},
                         {"lambda_eps", cfg.weights.lambda_eps}};
    j["seed"] = cfg.seed;
    j["checkpoint_interval"] = cfg.checkpoint_interval;
    j["max_gaussians"] = cfg.max_gaussians;
    j["hash_log2"] = cfg.sdm.hash_log2;
    j["net_res"] = cfg.sdm.net_res;
    j["lr_sdm_start"] = cfg.lr_sdm_start;
    j["lr_sdm_end"] = cfg.lr_sdm_end;
    j["lr_ibf_start"] = cfg.lr_ibf_start;
    j["lr_ibf_end"] = cfg.lr_ibf_end;
    j["ibf_warmup"] = cfg.ibf_warmup;
    j["lr_hash_start"] = cfg.lr_hash_start;
    j["lr_hash_end"] = cfg.lr_hash_end;
    j["lr_position_start"] = cfg.lr_position_start;
    j["lr_position_end"] = cfg.lr_position_end;
    j["lr_color"] = cfg.lr_color;
    j["lr_opacity"] = cfg.lr_opacity;
    j["lr_scale"] = cfg.lr_scale;
    j["lr_rotation"] = cfg.lr_rotation;
    j["background"] = {cfg.background[0], cfg.background[1], cfg.background[2]};
    std::string ablate;
    if (cfg.no_sd && cfg.no_td)
        ablate = "no-td-sd";
    else if (cfg.no_sd)
        ablate = "no-sd";
    else if (cfg.no_td)
        ablate = "no-td";
    else if (cfg.no_dgg)
        ablate = "no-dgg";
    else if (cfg.no_eps_reg)
        ablate = "no-eps-reg";
    else if (cfg.no_ms)
        ablate = "no-ms";
    j["ablate"] = ablate;
    j["threads"] = cfg.threads;
    return j.dump(2);
}

namespace {

struct ParamSlot {
    std::vector<float>* data;
    AdamState adam;
    Schedule sched;
    bool is_sd = false, is_td = false, is_gaussian = false;
};

double grad_norm_sq(const Tape& t, Tape::Id id) {
    double acc = 0;
    for (float g : t.grad(id)) acc += static_cast<double>(g) * g;
    return acc;
}

} // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& cfg_in, const std::string& out_dir) {
    TrainConfig cfg = cfg_in;
    std::filesystem::create_directories(out_dir);

    auto train_frames = dataset.split(false);
    require(!train_frames.empty(), "train: dataset has no training frames");

    // Initialize the cloud from the dataset's COLMAP export.
    ColmapScene colmap = load_colmap(dataset.dir + "/sparse/0");
    require(!colmap.points.empty(), "train: COLMAP export has no points");
    GaussianCloud cloud = init_from_points(colmap.points, colmap.point_colors,
                                           static_cast<size_t>(cfg.max_gaussians), cfg.seed);
    std::vector<Vec3> pts(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) pts[i] = cloud.position(i);
    const SceneBounds bounds = compute_bounds(pts);

    SdmParams sdm = init_sdm(cfg.sdm, cfg.seed + 1);

    const int total_steps = cfg.stages.total();
    require(total_steps >= 0, "train: negative step count");
    if (cfg.ibf_warmup < 0)
        cfg.ibf_warmup = static_cast<int>(std::lround(total_steps * (1024.0 / 30000.0)));
    if (cfg.ibf_warmup >= total_steps) cfg.ibf_warmup = std::max(0, total_steps - 1);

    // Per-frame network inputs are fixed; precompute them.
    struct FrameCache {
        const LoadedFrame* frame;
        HostTensor wpe_in, ibf_in;
    };
    std::vector<FrameCache> cache;
    for (const LoadedFrame* f : train_frames) {
        FrameCache fc;
        fc.frame = f;
        fc.wpe_in = make_wpe_input(f->camera.degraded_image, f->camera.pseudo_depth, cfg.sdm.net_res);
        fc.ibf_in = make_ibf_input(f->camera.degraded_image, cfg.sdm.net_res);
        cache.push_back(std::move(fc));
    }

    // Optimizer slots. SDM tensor order matches SdmParams::all().
    const Schedule sched_sdm{cfg.lr_sdm_start, cfg.lr_sdm_end, total_steps, 0};
    const Schedule sched_ibf{cfg.lr_ibf_start, cfg.lr_ibf_end, total_steps, cfg.ibf_warmup};
    const Schedule sched_hash{cfg.lr_hash_start, cfg.lr_hash_end, total_steps, 0};
    const Schedule sched_pos{cfg.lr_position_start * bounds.extent,
                             cfg.lr_position_end * bounds.extent, total_steps, 0};
    auto flat = [&](float lr) { return Schedule{lr, lr, total_steps, 0}; };

    std::vector<ParamSlot> slots;
    auto add_slot = [&](std::vector<float>* d, Schedule s, bool sd, bool td, bool ga) {
        slots.push_back(ParamSlot{d, {}, s, sd, td, ga});
    };
    add_slot(&cloud.positions, sched_pos, false, false, true);
    add_slot(&cloud.log_scales, flat(cfg.lr_scale), false, false, true);
    add_slot(&cloud.rotations, flat(cfg.lr_rotation), false, false, true);
    add_slot(&cloud.opacity_logits, flat(cfg.lr_opacity), false, false, true);
    add_slot(&cloud.intrinsic_color_logits, flat(cfg.lr_color), false, false, true);
    for (ParamTensor& t : sdm.wpe) add_slot(&t.data, sched_sdm, true, false, false);
    for (ParamTensor& t : sdm.ibf) add_slot(&t.data, sched_ibf, false, true, false);
    for (ParamTensor& t : sdm.hash) add_slot(&t.data, sched_hash, false, true, false);
    for (ParamTensor& t : sdm.omega) add_slot(&t.data, sched_sdm, false, true, false);
    for (ParamTensor& t : sdm.decoder) add_slot(&t.data, sched_sdm, false, true, false);

    const std::string log_path = out_dir + "/train_log.csv";
    std::ofstream log(log_path);
    if (!log) throw IoError("cannot write " + log_path);
    log << "step,frame,total,photo,cds,ads,eps_reg,sd_grad_norm,td_grad_norm,"
           "lr_sdm,lr_ibf,lr_hash,lr_position\n";

    {
        std::ofstream rc(out_dir + "/resolved_config.json");
        rc << train_config_to_json(cfg) << "\n";
    }

    SdmFlags flags;
    flags.use_sd = !cfg.no_sd;
    flags.use_td = !cfg.no_td;

    auto save = [&](int step, const std::string& path) {
        Checkpoint ck;
        ck.cloud = cloud;
        ck.sdm = sdm;
        ck.bounds = bounds;
        ck.step = step;
        for (const FrameCache& fc : cache) {
            if (flags.use_sd)
                ck.water_history.push_back(
                    predict_water_values(sdm, fc.frame->camera.degraded_image,
                                         fc.frame->camera.pseudo_depth));
            else
                ck.water_history.push_back(WaterParams{{0.5f, 0.5f, 0.5f},
                                                       {1e-4f, 1e-4f, 1e-4f},
                                                       {1e-4f, 1e-4f, 1e-4f}});
        }
        save_checkpoint(path, ck);
        return ck;
    };

    // Seeded shuffle, re-drawn each epoch.
    Pcg32 frame_rng(cfg.seed, 0xf7a3e);
    std::vector<int> order(cache.size());
    std::iota(order.begin(), order.end(), 0);
    auto reshuffle = [&] {
        for (size_t i = 0; i + 1 < order.size(); ++i) {
            size_t j = i + frame_rng.bounded(static_cast<uint32_t>(order.size() - i));
            std::swap(order[i], order[j]);
        }
    };
    reshuffle();

    Tape tape;
    float last_total = 0;
    for (int step = 0; step < total_steps; ++step) {
        const size_t epoch_pos = static_cast<size_t>(step) % order.size();
        if (step > 0 && epoch_pos == 0) reshuffle();
        const FrameCache& fc = cache[order[epoch_pos]];
        const CameraFrame& cam = fc.frame->camera;

        tape.reset();
        CloudLeaves cl = make_cloud_leaves(tape, cloud);
        SdmLeaves sl = make_sdm_leaves(tape, sdm);
        FrameForward ff = sdm_frame_forward(tape, cl, cloud.size(), sl, sdm, cam, fc.wpe_in,
                                            fc.ibf_in, bounds, flags, cloud);
        RenderTapeOutput ro = render_tape(tape, ff.splats, cam.width, cam.height, cfg.background);

        Tape::Id observed = tape.constant(cam.degraded_image.data, cam.degraded_image.shape);
        Tape::Id photo = photometric_loss(tape, ro.image, observed, cfg.weights);
        Tape::Id cds = Tape::kNone, ads = Tape::kNone;
        if (!cfg.no_dgg) {
            Tape::Id pseudo = tape.constant(cam.pseudo_depth.data, cam.pseudo_depth.shape);
            cds = pearson_depth_loss(tape, pseudo, ro.depth);
            ads = edge_aware_smoothness(tape, ro.depth, cam.pseudo_depth, cam.degraded_image);
        }
        Tape::Id eps = Tape::kNone;
        if (flags.use_td && !cfg.no_eps_reg) eps = epsilon_reg(tape, ff.epsilons);
        TotalLoss tl = total_loss(tape, photo, cds, ads, eps, cfg.weights);

        last_total = tape.scalar(tl.total);
        if (!std::isfinite(last_total)) {
            throw NumericError("NaN/inf loss at step " + std::to_string(step) + " on frame t=" +
                               std::to_string(cam.t) + " (photo=" + std::to_string(tape.scalar(photo)) +
                               ")");
        }

        tape.backward(tl.total);

        const TrainableMask mask = cfg.no_ms ? TrainableMask{true, true, true}
                                             : trainable_mask(cfg.stages, step);

        // Gather leaf gradients in slot order (cloud tensors then SDM tensors).
        std::vector<Tape::Id> leaf_ids{cl.positions, cl.log_scales, cl.rotations, cl.opacity_logits,
                                       cl.color_logits};
        for (const auto* grp : {&sl.wpe, &sl.ibf, &sl.hash, &sl.omega, &sl.decoder})
            leaf_ids.insert(leaf_ids.end(), grp->begin(), grp->end());

        double sd_norm2 = 0, td_norm2 = 0;
        for (size_t si = 0; si < slots.size(); ++si) {
            ParamSlot& slot = slots[si];
            const bool active = (slot.is_sd && mask.sd) || (slot.is_td && mask.td) ||
                                (slot.is_gaussian && mask.gaussians);
            if (!active) continue; // frozen: parameters and Adam state stay untouched
            auto g = tape.grad(leaf_ids[si]);
            if (slot.is_sd) sd_norm2 += grad_norm_sq(tape, leaf_ids[si]);
            if (slot.is_td) td_norm2 += grad_norm_sq(tape, leaf_ids[si]);
            adam_step(std::span<float>(slot.data->data(), slot.data->size()), g, slot.adam,
                      lr_at(slot.sched, step));
        }
        cloud.renormalize_quaternions();

        log << step << ',' << cam.t << ',' << last_total << ',' << tape.scalar(photo) << ','
            << (cds != Tape::kNone ? tape.scalar(cds) : 0.0f) << ','
            << (ads != Tape::kNone ? tape.scalar(ads) : 0.0f) << ','
            << (eps != Tape::kNone ? tape.scalar(eps) : 0.0f) << ',' << std::sqrt(sd_norm2) << ','
            << std::sqrt(td_norm2) << ',' << lr_at(sched_sdm, step) << ',' << lr_at(sched_ibf, step)
            << ',' << lr_at(sched_hash, step) << ',' << lr_at(sched_pos, step) << '\n';

        if (cfg.checkpoint_interval > 0 && (step + 1) % cfg.checkpoint_interval == 0 &&
            step + 1 < total_steps) {
            char name[64];
            std::snprintf(name, sizeof(name), "/ckpt_%06d.ply", step + 1);
            save(step + 1, out_dir + name);
        }
    }

    TrainResult res;
    res.checkpoint_path = out_dir + "/ckpt_final.ply";
    res.checkpoint = save(total_steps, res.checkpoint_path);
    res.log_path = log_path;
    res.final_loss = last_total;
    return res;
}

} // namespace uwgs
