// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Talks to the core exclusively through the C API.
#include <CLI11.hpp>
#include <json.hpp>
#include <uwgs.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace {

// Exit-code contract: 0 ok, 2 usage/config, 3 I/O, 4 numeric failure.
int exit_code(uwgs_status s) {
    switch (s) {
    case UWGS_OK: return 0;
    case UWGS_ERR_INVALID:
    case UWGS_ERR_PARSE: return 2;
    case UWGS_ERR_IO: return 3;
    case UWGS_ERR_NUMERIC: return 4;
    case UWGS_ERR_INTERNAL: return 1;
    }
    return 1;
}

int finish(uwgs_status s) {
    if (s != UWGS_OK)
        std::fprintf(stderr, "uwgs: %s: %s\n", uwgs_status_str(s), uwgs_last_error());
    return exit_code(s);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        std::fprintf(stderr, "uwgs: cannot open %s\n", path.c_str());
        std::exit(3);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int default_threads() {
    if (const char* env = std::getenv("UWGS_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"underwater degradation-aware gaussian splatting"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic underwater dataset");
    std::string sy_spec, sy_out, sy_size;
    int sy_frames = -1;
    long long sy_seed = -1;
    int sy_threads = default_threads();
    synth->add_option("--spec", sy_spec, "scene spec JSON")->required();
    synth->add_option("--out", sy_out, "output dataset directory")->required();
    synth->add_option("--frames", sy_frames, "override frame count");
    synth->add_option("--size", sy_size, "override image size WxH (e.g. 128x96)");
    synth->add_option("--seed", sy_seed, "override seed");
    synth->add_option("--threads", sy_threads, "worker threads");

    // train
    auto* train = app.add_subcommand("train", "train a checkpoint on a dataset");
    std::string tr_data, tr_out, tr_config, tr_steps, tr_ablate;
    long long tr_seed = -1;
    int tr_threads = default_threads();
    train->add_option("--data", tr_data, "dataset directory")->required();
    train->add_option("--out", tr_out, "output directory")->required();
    train->add_option("--config", tr_config, "training config JSON file");
    train->add_option("--steps", tr_steps, "stage lengths a,b,c");
    train->add_option("--seed", tr_seed, "override seed");
    train->add_option("--ablate", tr_ablate, "one of: no-sd,no-td,no-td-sd,no-dgg,no-eps-reg,no-ms");
    train->add_option("--threads", tr_threads, "worker threads");

    // render
    auto* render = app.add_subcommand("render", "render views from a checkpoint");
    std::string rd_ckpt, rd_cams, rd_mode = "intrinsic", rd_water, rd_out;
    render->add_option("--ckpt", rd_ckpt, "checkpoint PLY")->required();
    render->add_option("--cameras", rd_cams, "dataset dir or COLMAP text dir")->required();
    render->add_option("--mode", rd_mode, "intrinsic | underwater");
    render->add_option("--water", rd_water, "water JSON for underwater mode (transfer)");
    render->add_option("--out", rd_out, "output directory")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint against a dataset");
    std::string ev_ckpt, ev_data, ev_out, ev_mode = "intrinsic", ev_panels;
    eval->add_option("--ckpt", ev_ckpt, "checkpoint PLY")->required();
    eval->add_option("--data", ev_data, "dataset directory")->required();
    eval->add_option("--out", ev_out, "report JSON path")->required();
    eval->add_option("--mode", ev_mode, "intrinsic | degraded");
    eval->add_option("--panels", ev_panels, "write side-by-side PNG panels here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (synth->parsed()) {
        nlohmann::json ov;
        if (sy_frames > 0) ov["frames"] = sy_frames;
        if (sy_seed >= 0) ov["seed"] = sy_seed;
        if (!sy_size.empty()) {
            int w = 0, h = 0;
            if (std::sscanf(sy_size.c_str(), "%dx%d", &w, &h) != 2 || w < 16 || h < 16) {
                std::fprintf(stderr, "uwgs: bad --size '%s', expected WxH\n", sy_size.c_str());
                return 2;
            }
            ov["width"] = w;
            ov["height"] = h;
        }
        const std::string ov_text = ov.empty() ? "" : ov.dump();
        uwgs_status s = uwgs_synth_dataset(sy_spec.c_str(), sy_out.c_str(),
                                           ov_text.empty() ? nullptr : ov_text.c_str(), sy_threads);
        if (s == UWGS_OK) std::printf("dataset written to %s\n", sy_out.c_str());
        return finish(s);
    }

    if (train->parsed()) {
        nlohmann::json cfg = nlohmann::json::object();
        if (!tr_config.empty()) {
            try {
                cfg = nlohmann::json::parse(read_file(tr_config));
            } catch (const nlohmann::json::exception& e) {
                std::fprintf(stderr, "uwgs: bad config %s: %s\n", tr_config.c_str(), e.what());
                return 2;
            }
        }
        if (!tr_steps.empty()) {
            int a = 0, b = 0, c = 0;
            if (std::sscanf(tr_steps.c_str(), "%d,%d,%d", &a, &b, &c) != 3 || a < 0 || b < 0 || c < 0) {
                std::fprintf(stderr, "uwgs: bad --steps '%s', expected a,b,c\n", tr_steps.c_str());
                return 2;
            }
            cfg["stages"] = {a, b, c};
        }
        if (tr_seed >= 0) cfg["seed"] = tr_seed;
        if (!tr_ablate.empty()) cfg["ablate"] = tr_ablate;
        cfg["threads"] = tr_threads;
        char ckpt_path[4096] = {0};
        uwgs_status s = uwgs_train(tr_data.c_str(), tr_out.c_str(), cfg.dump().c_str(), ckpt_path,
                                   sizeof(ckpt_path));
        if (s == UWGS_OK) std::printf("checkpoint: %s\n", ckpt_path);
        return finish(s);
    }

    if (render->parsed()) {
        uwgs_checkpoint* ck = nullptr;
        uwgs_status s = uwgs_checkpoint_open(rd_ckpt.c_str(), &ck);
        if (s != UWGS_OK) return finish(s);
        float water9[9];
        const float* water = nullptr;
        if (!rd_water.empty()) {
            try {
                nlohmann::json j = nlohmann::json::parse(read_file(rd_water));
                for (int k = 0; k < 3; ++k) {
                    water9[k] = j.at("ambient")[k].get<float>();
                    water9[3 + k] = j.at("attenuation")[k].get<float>();
                    water9[6 + k] = j.at("backscatter")[k].get<float>();
                }
                water = water9;
            } catch (const nlohmann::json::exception& e) {
                std::fprintf(stderr, "uwgs: bad water file %s: %s\n", rd_water.c_str(), e.what());
                uwgs_checkpoint_close(ck);
                return 2;
            }
        }
        s = uwgs_render_views(ck, rd_cams.c_str(), rd_mode.c_str(), water, rd_out.c_str());
        uwgs_checkpoint_close(ck);
        if (s == UWGS_OK) std::printf("renders written to %s\n", rd_out.c_str());
        return finish(s);
    }

    if (eval->parsed()) {
        uwgs_checkpoint* ck = nullptr;
        uwgs_status s = uwgs_checkpoint_open(ev_ckpt.c_str(), &ck);
        if (s != UWGS_OK) return finish(s);
        s = uwgs_evaluate(ck, ev_data.c_str(), ev_mode.c_str(), ev_out.c_str(),
                          ev_panels.empty() ? nullptr : ev_panels.c_str());
        uwgs_checkpoint_close(ck);
        if (s == UWGS_OK) std::printf("report: %s\n", ev_out.c_str());
        return finish(s);
    }

    return 2;
}
