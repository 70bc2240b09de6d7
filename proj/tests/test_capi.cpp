#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <uwgs.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "core/png_io.hpp"

namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

std::string write_spec(const std::string& dir, int frames = 8, int w = 48, int h = 36) {
    std::string path = dir + "/spec.json";
    std::ofstream out(path);
    out << R"({
      "name": "capi-test",
      "layout": "textured_wall",
      "gaussian_count": 50,
      "frames": )"
        << frames << R"(, "width": )" << w << R"(, "height": )" << h << R"(,
      "seed": 9,
      "water": {"ambient": [0.10, 0.55, 0.78],
                "attenuation": [3.30, 2.90, 2.50],
                "backscatter": [2.00, 1.88, 1.80]},
      "caustic": {"pattern": "A"},
      "pseudo_depth_noise": 0.0
    })";
    return path;
}

const char* kTinyTrainConfig = R"({
  "stages": [4, 4, 4],
  "net_res": 32,
  "hash_log2": 8,
  "seed": 3
})";

} // namespace

TEST_CASE("status strings and version") {
    CHECK(uwgs_version() >= 100);
    CHECK(std::strcmp(uwgs_status_str(UWGS_OK), "ok") == 0);
    CHECK(std::strlen(uwgs_status_str(UWGS_ERR_IO)) > 0);
}

TEST_CASE("null arguments and missing inputs map to the right status codes") {
    CHECK(uwgs_synth_dataset(nullptr, "x", nullptr, 1) == UWGS_ERR_INVALID);
    CHECK(uwgs_train("nonexistent-dir", nullptr, nullptr, nullptr, 0) == UWGS_ERR_INVALID);

    uwgs_checkpoint* ck = nullptr;
    CHECK(uwgs_checkpoint_open("/does/not/exist.ply", &ck) == UWGS_ERR_IO);
    CHECK(ck == nullptr);
    CHECK(std::strlen(uwgs_last_error()) > 0);

    std::string dir = temp_dir("uwgs_capi_badspec");
    std::ofstream bad(dir + "/spec.json");
    bad << "{ not json";
    bad.close();
    CHECK(uwgs_synth_dataset((dir + "/spec.json").c_str(), dir.c_str(), nullptr, 1) ==
          UWGS_ERR_PARSE);
}

TEST_CASE("synth + train + render + eval through the C API") {
    std::string root = temp_dir("uwgs_capi_pipeline");
    std::string spec = write_spec(root);
    std::string data = root + "/data";

    REQUIRE(uwgs_synth_dataset(spec.c_str(), data.c_str(), nullptr, 1) == UWGS_OK);
    CHECK(fs::exists(data + "/manifest.json"));
    CHECK(fs::exists(data + "/sparse/0/cameras.txt"));
    CHECK(fs::exists(data + "/resolved_spec.json"));

    char ckpt_path[1024] = {0};
    REQUIRE(uwgs_train(data.c_str(), (root + "/run").c_str(), kTinyTrainConfig, ckpt_path,
                       sizeof(ckpt_path)) == UWGS_OK);
    CHECK(fs::exists(ckpt_path));

    uwgs_checkpoint* ck = nullptr;
    REQUIRE(uwgs_checkpoint_open(ckpt_path, &ck) == UWGS_OK);
    int64_t n = 0;
    CHECK(uwgs_checkpoint_num_gaussians(ck, &n) == UWGS_OK);
    CHECK(n == 50);

    float w9[9];
    REQUIRE(uwgs_checkpoint_average_water(ck, w9) == UWGS_OK);
    for (int k = 0; k < 3; ++k) {
        CHECK(w9[k] > 0.0f);
        CHECK(w9[k] < 1.0f);
        CHECK(w9[3 + k] > 0.0f);
        CHECK(w9[6 + k] > 0.0f);
    }

    SUBCASE("render views from the dataset cameras") {
        std::string rdir = root + "/renders";
        REQUIRE(uwgs_render_views(ck, data.c_str(), "intrinsic", nullptr, rdir.c_str()) == UWGS_OK);
        CHECK(fs::exists(rdir + "/render_0000.png"));
        CHECK(fs::exists(rdir + "/render_0007.png"));
        // Underwater mode with explicit water.
        REQUIRE(uwgs_render_views(ck, data.c_str(), "underwater", w9, (rdir + "_uw").c_str()) ==
                UWGS_OK);
        CHECK(uwgs_render_views(ck, data.c_str(), "nonsense", nullptr, rdir.c_str()) ==
              UWGS_ERR_INVALID);
    }

    SUBCASE("render a single view into buffers") {
        float cam18[18] = {40, 40, 24, 18, 48, 36, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0};
        std::vector<float> rgb(3 * 36 * 48), depth(36 * 48), alpha(36 * 48);
        REQUIRE(uwgs_render_view(ck, cam18, "intrinsic", nullptr, rgb.data(), depth.data(),
                                 alpha.data()) == UWGS_OK);
        bool any = false;
        for (float v : alpha)
            if (v > 0.5f) any = true;
        CHECK(any);
    }

    SUBCASE("evaluate writes a JSON report") {
        std::string report = root + "/report.json";
        REQUIRE(uwgs_evaluate(ck, data.c_str(), "intrinsic", report.c_str(), nullptr) == UWGS_OK);
        std::ifstream in(report);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        CHECK(text.find("aggregate") != std::string::npos);
        CHECK(text.find("psnr") != std::string::npos);
        CHECK(uwgs_evaluate(ck, data.c_str(), "bogus", report.c_str(), nullptr) ==
              UWGS_ERR_INVALID);
    }

    uwgs_checkpoint_close(ck);
}

TEST_CASE("synth determinism through the C API") {
    std::string root = temp_dir("uwgs_capi_det");
    std::string spec = write_spec(root, 4, 32, 24);
    REQUIRE(uwgs_synth_dataset(spec.c_str(), (root + "/a").c_str(), nullptr, 1) == UWGS_OK);
    REQUIRE(uwgs_synth_dataset(spec.c_str(), (root + "/b").c_str(), nullptr, 1) == UWGS_OK);
    for (auto& e : fs::recursive_directory_iterator(root + "/a")) {
        if (!e.is_regular_file()) continue;
        auto rel = fs::relative(e.path(), root + "/a");
        INFO(rel.string());
        CHECK(uwgs::file_crc32(e.path().string()) ==
              uwgs::file_crc32((fs::path(root + "/b") / rel).string()));
    }
}

TEST_CASE("overrides JSON adjusts the synthesized dataset") {
    std::string root = temp_dir("uwgs_capi_override");
    std::string spec = write_spec(root, 8, 48, 36);
    REQUIRE(uwgs_synth_dataset(spec.c_str(), (root + "/d").c_str(),
                               R"({"frames": 4, "width": 32, "height": 24})", 1) == UWGS_OK);
    uwgs::HostTensor img = uwgs::read_png_rgb8(root + "/d/images_degraded/frame_0000.png");
    CHECK(img.width() == 32);
    CHECK(img.height() == 24);
    CHECK_FALSE(fs::exists(root + "/d/images_degraded/frame_0004.png"));
}
