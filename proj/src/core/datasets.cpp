// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#include "datasets.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <thread>

#include "colmap.hpp"
#include "png_io.hpp"
#include "renderer.hpp"
#include "rng.hpp"

namespace uwgs {

namespace fs = std::filesystem;
using nlohmann::json;

SceneLayout layout_from_string(const std::string& s) {
    if (s == "textured_wall") return SceneLayout::TexturedWall;
    if (s == "terraced_boxes") return SceneLayout::TerracedBoxes;
    if (s == "color_grid") return SceneLayout::ColorGrid;
    throw ParseError("unknown scene layout: " + s);
}

std::string layout_to_string(SceneLayout l) {
    switch (l) {
    case SceneLayout::TexturedWall: return "textured_wall";
    case SceneLayout::TerracedBoxes: return "terraced_boxes";
    case SceneLayout::ColorGrid: return "color_grid";
    }
    return "textured_wall";
}

namespace {

Vec3 json_vec3(const json& j) {
    require(j.is_array() && j.size() == 3, "expected a 3-element array");
    return {j[0].get<float>(), j[1].get<float>(), j[2].get<float>()};
}

json vec3_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

WaterParams water_from_json(const json& j) {
    WaterParams w;
    w.ambient = json_vec3(j.at("ambient"));
    w.attenuation = json_vec3(j.at("attenuation"));
    w.backscatter = json_vec3(j.at("backscatter"));
    require(w.valid(), "water parameters out of range");
    return w;
}

json water_to_json(const WaterParams& w) {
    return json{{"ambient", vec3_json(w.ambient)},
                {"attenuation", vec3_json(w.attenuation)},
                {"backscatter", vec3_json(w.backscatter)}};
}

CausticConfig caustic_from_json(const json& j) {
    CausticConfig c = caustic_preset(j.value("pattern", "A"));
    if (j.contains("base_frequency")) c.base_frequency = j["base_frequency"].get<float>();
    if (j.contains("velocity")) {
        c.velocity[0] = j["velocity"][0].get<float>();
        c.velocity[1] = j["velocity"][1].get<float>();
    }
    if (j.contains("octaves")) c.octaves = j["octaves"].get<int>();
    if (j.contains("amplitude")) c.amplitude = j["amplitude"].get<float>();
    if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
    require(c.amplitude >= 0, "caustic amplitude must be >= 0");
    require(c.octaves >= 1, "caustic octaves must be >= 1");
    return c;
}

json caustic_to_json(const CausticConfig& c) {
    return json{{"pattern", c.pattern_id},   {"base_frequency", c.base_frequency},
                {"velocity", json::array({c.velocity[0], c.velocity[1]})},
                {"octaves", c.octaves},      {"amplitude", c.amplitude},
                {"seed", c.seed}};
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return j;
}

} // namespace

SyntheticSceneSpec load_scene_spec(const std::string& json_path) {
    json j = load_json_file(json_path);
    SyntheticSceneSpec spec;
    try {
        spec.name = j.value("name", std::string("scene"));
        spec.layout = layout_from_string(j.value("layout", std::string("textured_wall")));
        spec.gaussian_count = j.value("gaussian_count", 200);
        spec.frames = j.value("frames", 40);
        spec.width = j.value("width", 128);
        spec.height = j.value("height", 96);
        spec.seed = j.value("seed", static_cast<uint64_t>(7));
        if (j.contains("water")) spec.water = water_from_json(j["water"]);
        if (j.contains("caustic")) spec.caustic = caustic_from_json(j["caustic"]);
        spec.caustics_enabled = j.value("caustics_enabled", true);
        spec.pseudo_depth_noise = j.value("pseudo_depth_noise", 0.05f);
    } catch (const json::exception& e) {
        throw ParseError(json_path + ": " + e.what());
    }
    require(spec.frames >= 2, "scene spec: frames must be >= 2");
    require(spec.gaussian_count >= 1, "scene spec: gaussian_count must be >= 1");
    require(spec.width >= 16 && spec.height >= 16, "scene spec: image size too small");
    return spec;
}

namespace {

// Palettes: the wall gets noise-mixed colors, the grid cycles through a fixed
// palette (greens included for the S3-style color distortion scenes).
const Vec3 kPalette[] = {
    {0.85f, 0.35f, 0.25f}, {0.90f, 0.75f, 0.30f}, {0.25f, 0.60f, 0.85f}, {0.30f, 0.75f, 0.40f},
    {0.80f, 0.55f, 0.75f}, {0.95f, 0.90f, 0.80f}, {0.20f, 0.80f, 0.60f}, {0.55f, 0.45f, 0.30f},
};
constexpr int kPaletteSize = 8;

struct RawScene {
    std::vector<Vec3> positions;
    std::vector<Vec3> colors;
    std::vector<float> scales;
};

// Gaussians on a jittered grid patch of the z = depth plane.
void add_wall(RawScene& s, int count, float half_w, float half_h, float depth, float depth_jitter,
              Pcg32& rng, int color_mode /*0 noise, 1 palette cycle*/) {
    const float aspect = half_w / half_h;
    int ny = std::max(2, static_cast<int>(std::round(std::sqrt(count / aspect))));
    int nx = std::max(2, (count + ny - 1) / ny);
    const float dx = 2 * half_w / (nx - 1), dy = 2 * half_h / (ny - 1);
    int made = 0;
    for (int iy = 0; iy < ny && made < count; ++iy) {
        for (int ix = 0; ix < nx && made < count; ++ix, ++made) {
            float x = -half_w + ix * dx + rng.uniform(-0.15f, 0.15f) * dx;
            float y = -half_h + iy * dy + rng.uniform(-0.15f, 0.15f) * dy;
            float z = depth + rng.uniform(-depth_jitter, depth_jitter);
            s.positions.push_back({x, y, z});
            Vec3 c;
            if (color_mode == 1) {
                c = kPalette[made % kPaletteSize];
            } else {
                // Smooth multi-scale color field over the wall.
                float n1 = lattice_hash01(static_cast<int64_t>(std::floor(x * 4)),
                                          static_cast<int64_t>(std::floor(y * 4)), 11);
                float n2 = lattice_hash01(static_cast<int64_t>(std::floor(x * 9)),
                                          static_cast<int64_t>(std::floor(y * 9)), 23);
                const Vec3& a = kPalette[static_cast<int>(n1 * kPaletteSize) % kPaletteSize];
                const Vec3& b = kPalette[static_cast<int>(n2 * kPaletteSize) % kPaletteSize];
                float m = 0.35f + 0.3f * n2;
                c = {a[0] * (1 - m) + b[0] * m, a[1] * (1 - m) + b[1] * m, a[2] * (1 - m) + b[2] * m};
                c[0] = clampf(c[0] + rng.uniform(-0.08f, 0.08f), 0.05f, 0.95f);
                c[1] = clampf(c[1] + rng.uniform(-0.08f, 0.08f), 0.05f, 0.95f);
                c[2] = clampf(c[2] + rng.uniform(-0.08f, 0.08f), 0.05f, 0.95f);
            }
            s.colors.push_back(c);
            s.scales.push_back(0.75f * std::max(dx, dy));
        }
    }
}

} // namespace

SynthScene synth_scene(const SyntheticSceneSpec& spec) {
    Pcg32 rng(spec.seed, 0xda7a);
    RawScene raw;

    // All layouts keep a backdrop wall at z=2 that covers the camera frustum;
    // variants differ in foreground structure and coloring.
    const float wall_z = 2.0f;
    const float half_w = 1.5f, half_h = 1.2f;
    switch (spec.layout) {
    case SceneLayout::TexturedWall: {
        int fg = spec.gaussian_count / 5;
        add_wall(raw, spec.gaussian_count - fg, half_w, half_h, wall_z, 0.02f, rng, 0);
        // A few protruding blobs for parallax.
        add_wall(raw, fg, 0.45f, 0.35f, wall_z - 0.45f, 0.05f, rng, 0);
        break;
    }
    case SceneLayout::TerracedBoxes: {
        int per = spec.gaussian_count / 4;
        add_wall(raw, spec.gaussian_count - 3 * per, half_w, half_h, wall_z, 0.02f, rng, 0);
        add_wall(raw, per, 0.9f, 0.25f, wall_z - 0.35f, 0.04f, rng, 0);
        add_wall(raw, per, 0.7f, 0.2f, wall_z - 0.7f, 0.04f, rng, 0);
        add_wall(raw, per, 0.5f, 0.15f, wall_z - 1.05f, 0.04f, rng, 0);
        break;
    }
    case SceneLayout::ColorGrid: {
        add_wall(raw, spec.gaussian_count, half_w, half_h, wall_z, 0.02f, rng, 1);
        break;
    }
    }

    // Forward-facing arc with a dolly-in so viewpoint distances vary.
    std::vector<Vec3> eyes(spec.frames);
    for (int i = 0; i < spec.frames; ++i) {
        const float u = spec.frames > 1 ? static_cast<float>(i) / (spec.frames - 1) : 0.0f;
        const float swing = std::sin(u * 6.2831853f * 0.75f);
        eyes[i] = {0.28f * swing, 0.12f * std::sin(u * 6.2831853f * 0.5f), 0.85f * u};
    }

    // Rescale so the maximum camera-to-Gaussian distance is ~1.
    float max_d = 0;
    for (const Vec3& e : eyes)
        for (const Vec3& p : raw.positions) {
            float d2 = 0;
            for (int k = 0; k < 3; ++k) d2 += (p[k] - e[k]) * (p[k] - e[k]);
            max_d = std::max(max_d, std::sqrt(d2));
        }
    const float k_scale = 1.0f / std::max(max_d, 1e-6f);

    SynthScene out;
    const size_t n = raw.positions.size();
    out.gaussians.resize(n);
    for (size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) {
            out.gaussians.positions[i * 3 + k] = raw.positions[i][k] * k_scale;
            out.gaussians.intrinsic_color_logits[i * 3 + k] =
                logitf(clampf(raw.colors[i][k], 0.001f, 0.999f));
            out.gaussians.log_scales[i * 3 + k] = std::log(raw.scales[i] * k_scale);
        }
        out.gaussians.rotations[i * 4] = 1;
        out.gaussians.rotations[i * 4 + 1] = out.gaussians.rotations[i * 4 + 2] =
            out.gaussians.rotations[i * 4 + 3] = 0;
        out.gaussians.opacity_logits[i] = logitf(0.995f);
    }

    const Vec3 target{0, 0, wall_z * k_scale};
    for (int i = 0; i < spec.frames; ++i) {
        CameraFrame cam;
        cam.width = spec.width;
        cam.height = spec.height;
        cam.fx = cam.fy = 0.85f * spec.width;
        cam.cx = 0.5f * (spec.width - 1);
        cam.cy = 0.5f * (spec.height - 1);
        Vec3 eye{eyes[i][0] * k_scale, eyes[i][1] * k_scale, eyes[i][2] * k_scale};
        // Camera axes: x right, y down, z forward (COLMAP convention).
        Vec3 zc{target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]};
        float zn = std::sqrt(zc[0] * zc[0] + zc[1] * zc[1] + zc[2] * zc[2]);
        for (float& v : zc) v /= zn;
        Vec3 down{0, 1, 0};
        Vec3 xc{down[1] * zc[2] - down[2] * zc[1], down[2] * zc[0] - down[0] * zc[2],
                down[0] * zc[1] - down[1] * zc[0]};
        float xn = std::sqrt(xc[0] * xc[0] + xc[1] * xc[1] + xc[2] * xc[2]);
        for (float& v : xc) v /= xn;
        Vec3 yc{zc[1] * xc[2] - zc[2] * xc[1], zc[2] * xc[0] - zc[0] * xc[2],
                zc[0] * xc[1] - zc[1] * xc[0]};
        cam.rotation = {xc[0], xc[1], xc[2], yc[0], yc[1], yc[2], zc[0], zc[1], zc[2]};
        cam.translation = {-(cam.rotation[0] * eye[0] + cam.rotation[1] * eye[1] + cam.rotation[2] * eye[2]),
                           -(cam.rotation[3] * eye[0] + cam.rotation[4] * eye[1] + cam.rotation[5] * eye[2]),
                           -(cam.rotation[6] * eye[0] + cam.rotation[7] * eye[1] + cam.rotation[8] * eye[2])};
        cam.t = i;
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04d.png", i);
        cam.name = name;
        out.cameras.push_back(cam);
    }
    return out;
}

namespace {

void run_frames(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            int i;
            while ((i = next.fetch_add(1)) < n) fn(i);
        });
    for (auto& th : pool) th.join();
}

} // namespace

DatasetManifest generate_dataset(const SyntheticSceneSpec& spec, const std::string& out_dir,
                                 int threads) {
    SynthScene scene = synth_scene(spec);
    require(spec.water.valid(), "generate_dataset: invalid water parameters");

    std::error_code ec;
    for (const char* sub : {"", "/images_degraded", "/images_clean", "/depth", "/pseudo_depth",
                            "/sparse", "/sparse/0"}) {
        fs::create_directories(out_dir + sub, ec);
        if (ec) throw IoError("cannot create " + out_dir + sub + ": " + ec.message());
    }

    DatasetManifest man;
    man.name = spec.name;
    man.width = spec.width;
    man.height = spec.height;
    man.seed = spec.seed;
    man.water = spec.water;
    CausticConfig caustic = spec.caustic;
    if (!spec.caustics_enabled) caustic.amplitude = 0.0f;
    man.caustic = caustic;
    man.frames.resize(spec.frames);

    std::vector<HostTensor> degraded_store(spec.frames);
    run_frames(spec.frames, threads, [&](int i) {
        const CameraFrame& cam = scene.cameras[i];
        RenderOutput clean = render_cloud(scene.gaussians, cam, {0, 0, 0});
        HostTensor staged = caustic.amplitude > 0
                                ? modulate_caustics(clean.image, clean.depth, cam, caustic, i)
                                : clean.image;
        HostTensor degraded = apply_water_image(staged, clean.depth, spec.water);

        float zmax = 1e-6f;
        for (float v : clean.depth.data) zmax = std::max(zmax, v);
        HostTensor depth_norm(clean.depth.shape);
        for (size_t k = 0; k < depth_norm.data.size(); ++k)
            depth_norm.data[k] = clean.depth.data[k] / zmax;

        // Pseudo-depth: normalized depth with optional multiplicative noise.
        HostTensor pseudo = depth_norm;
        if (spec.pseudo_depth_noise > 0) {
            Pcg32 rng(spec.seed ^ splitmix64(static_cast<uint64_t>(i) + 1), 0x9d);
            for (float& v : pseudo.data)
                v = clampf(v * std::exp(spec.pseudo_depth_noise * rng.normal()), 0.0f, 1.0f);
        }

        FrameRecord& rec = man.frames[i];
        rec.t = i;
        char base[32];
        std::snprintf(base, sizeof(base), "frame_%04d", i);
        rec.name = base;
        rec.degraded_path = "images_degraded/" + rec.name + ".png";
        rec.clean_path = "images_clean/" + rec.name + ".png";
        rec.depth_path = "depth/" + rec.name + ".png";
        rec.pseudo_depth_path = "pseudo_depth/" + rec.name + ".png";
        rec.depth_scale = zmax;
        rec.is_test = (i % 8 == 0);
        rec.camera = cam;

        write_png_rgb8(out_dir + "/" + rec.degraded_path, degraded);
        write_png_rgb8(out_dir + "/" + rec.clean_path, clean.image);
        write_png_gray16(out_dir + "/" + rec.depth_path, depth_norm);
        write_png_gray16(out_dir + "/" + rec.pseudo_depth_path, pseudo);
        rec.crc_degraded = file_crc32(out_dir + "/" + rec.degraded_path);
        rec.crc_clean = file_crc32(out_dir + "/" + rec.clean_path);
        rec.crc_depth = file_crc32(out_dir + "/" + rec.depth_path);
        rec.crc_pseudo = file_crc32(out_dir + "/" + rec.pseudo_depth_path);
        degraded_store[i] = std::move(degraded);
    });

    // COLMAP text export. Point colors are the observed (degraded) colors at
    // the middle frame, as an SfM pipeline would see them.
    {
        std::vector<Vec3> pts, cols;
        const int mid = spec.frames / 2;
        const CameraFrame& cam = scene.cameras[mid];
        const HostTensor& img = degraded_store[mid];
        for (size_t i = 0; i < scene.gaussians.size(); ++i) {
            Vec3 p = scene.gaussians.position(i);
            pts.push_back(p);
            Vec3 pc = mat3_mul(cam.rotation, p);
            for (int k = 0; k < 3; ++k) pc[k] += cam.translation[k];
            Vec3 c = scene.gaussians.intrinsic_color(i);
            if (pc[2] > 0.01f) {
                int px = static_cast<int>(cam.fx * pc[0] / pc[2] + cam.cx + 0.5f);
                int py = static_cast<int>(cam.fy * pc[1] / pc[2] + cam.cy + 0.5f);
                if (px >= 0 && px < cam.width && py >= 0 && py < cam.height)
                    c = {img.at(0, py, px), img.at(1, py, px), img.at(2, py, px)};
            }
            cols.push_back(c);
        }
        save_colmap(out_dir + "/sparse/0", scene.cameras, pts, cols);
    }

    json j;
    j["format"] = "uwgs-dataset-v1";
    j["name"] = man.name;
    j["width"] = man.width;
    j["height"] = man.height;
    j["seed"] = man.seed;
    j["layout"] = layout_to_string(spec.layout);
    j["gaussian_count"] = spec.gaussian_count;
    j["water"] = water_to_json(spec.water);
    j["caustic"] = caustic_to_json(caustic);
    j["pseudo_depth_noise"] = spec.pseudo_depth_noise;
    j["frames"] = json::array();
    for (const FrameRecord& r : man.frames) {
        json f;
        f["t"] = r.t;
        f["name"] = r.name;
        f["degraded"] = r.degraded_path;
        f["clean"] = r.clean_path;
        f["depth"] = r.depth_path;
        f["pseudo_depth"] = r.pseudo_depth_path;
        f["depth_scale"] = r.depth_scale;
        f["split"] = r.is_test ? "test" : "train";
        f["camera"] = {{"fx", r.camera.fx},         {"fy", r.camera.fy},
                       {"cx", r.camera.cx},         {"cy", r.camera.cy},
                       {"width", r.camera.width},   {"height", r.camera.height},
                       {"rotation", r.camera.rotation}, {"translation", r.camera.translation}};
        f["crc"] = {{"degraded", r.crc_degraded},
                    {"clean", r.crc_clean},
                    {"depth", r.crc_depth},
                    {"pseudo_depth", r.crc_pseudo}};
        j["frames"].push_back(f);
    }
    std::ofstream out(out_dir + "/manifest.json");
    if (!out) throw IoError("cannot write " + out_dir + "/manifest.json");
    out << j.dump(2) << "\n";

    // Resolved spec, loadable again via --spec for byte-identical regeneration.
    json rs;
    rs["name"] = spec.name;
    rs["layout"] = layout_to_string(spec.layout);
    rs["gaussian_count"] = spec.gaussian_count;
    rs["frames"] = spec.frames;
    rs["width"] = spec.width;
    rs["height"] = spec.height;
    rs["seed"] = spec.seed;
    rs["water"] = water_to_json(spec.water);
    rs["caustic"] = caustic_to_json(spec.caustic);
    rs["caustics_enabled"] = spec.caustics_enabled;
    rs["pseudo_depth_noise"] = spec.pseudo_depth_noise;
    std::ofstream rout(out_dir + "/resolved_spec.json");
    if (!rout) throw IoError("cannot write " + out_dir + "/resolved_spec.json");
    rout << rs.dump(2) << "\n";
    return man;
}

DatasetManifest read_manifest(const std::string& dir) {
    json j = load_json_file(dir + "/manifest.json");
    DatasetManifest man;
    try {
        require(j.value("format", std::string()) == "uwgs-dataset-v1",
                "unsupported manifest format in " + dir);
        man.name = j.value("name", std::string());
        man.width = j.at("width").get<int>();
        man.height = j.at("height").get<int>();
        man.seed = j.value("seed", static_cast<uint64_t>(0));
        if (j.contains("water")) man.water = water_from_json(j["water"]);
        if (j.contains("caustic")) man.caustic = caustic_from_json(j["caustic"]);
        for (const json& f : j.at("frames")) {
            FrameRecord r;
            r.t = f.at("t").get<int>();
            r.name = f.at("name").get<std::string>();
            r.degraded_path = f.at("degraded").get<std::string>();
            r.clean_path = f.value("clean", std::string());
            r.depth_path = f.value("depth", std::string());
            r.pseudo_depth_path = f.at("pseudo_depth").get<std::string>();
            r.depth_scale = f.value("depth_scale", 1.0f);
            r.is_test = f.at("split").get<std::string>() == "test";
            const json& c = f.at("camera");
            r.camera.fx = c.at("fx").get<float>();
            r.camera.fy = c.at("fy").get<float>();
            r.camera.cx = c.at("cx").get<float>();
            r.camera.cy = c.at("cy").get<float>();
            r.camera.width = c.at("width").get<int>();
            r.camera.height = c.at("height").get<int>();
            auto rot = c.at("rotation");
            for (int k = 0; k < 9; ++k) r.camera.rotation[k] = rot[k].get<float>();
            auto tr = c.at("translation");
            for (int k = 0; k < 3; ++k) r.camera.translation[k] = tr[k].get<float>();
            r.camera.t = r.t;
            r.camera.name = r.name;
            if (f.contains("crc")) {
                r.crc_degraded = f["crc"].value("degraded", 0u);
                r.crc_clean = f["crc"].value("clean", 0u);
                r.crc_depth = f["crc"].value("depth", 0u);
                r.crc_pseudo = f["crc"].value("pseudo_depth", 0u);
            }
            man.frames.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw ParseError(dir + "/manifest.json: " + e.what());
    }
    return man;
}

Dataset load_dataset(const std::string& dir) {
    Dataset ds;
    ds.dir = dir;
    ds.manifest = read_manifest(dir);
    auto checked = [&](const std::string& rel, uint32_t crc) {
        const std::string path = dir + "/" + rel;
        if (!fs::exists(path)) throw IoError("dataset file missing: " + path);
        if (crc != 0 && file_crc32(path) != crc) throw IoError("checksum mismatch: " + path);
        return path;
    };
    for (const FrameRecord& r : ds.manifest.frames) {
        LoadedFrame f;
        f.camera = r.camera;
        f.is_test = r.is_test;
        f.camera.degraded_image = read_png_rgb8(checked(r.degraded_path, r.crc_degraded));
        f.camera.pseudo_depth = read_png_gray16(checked(r.pseudo_depth_path, r.crc_pseudo));
        if (!r.clean_path.empty())
            f.clean = read_png_rgb8(checked(r.clean_path, r.crc_clean));
        if (!r.depth_path.empty()) {
            f.depth = read_png_gray16(checked(r.depth_path, r.crc_depth));
            for (float& v : f.depth.data) v *= r.depth_scale;
        }
        ds.frames.push_back(std::move(f));
    }
    return ds;
}

} // namespace uwgs
