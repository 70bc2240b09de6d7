// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#include "colmap.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace uwgs {

namespace {

struct LineReader {
    std::ifstream in;
    std::string path;
    int lineno = 0;

    explicit LineReader(const std::string& p) : in(p), path(p) {
        if (!in) throw IoError("missing COLMAP file: " + p);
    }
    // Next non-comment, non-empty line; false at EOF.
    bool next(std::string& out) {
        std::string line;
        while (std::getline(in, line)) {
            ++lineno;
            size_t s = line.find_first_not_of(" \t\r");
            if (s == std::string::npos || line[s] == '#') continue;
            out = line;
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(path + ":" + std::to_string(lineno) + ": " + what);
    }
};

struct CameraIntr {
    float fx, fy, cx, cy;
    int width, height;
};

} // namespace

ColmapScene load_colmap(const std::string& dir) {
    ColmapScene scene;

    std::map<int, CameraIntr> cams;
    {
        LineReader r(dir + "/cameras.txt");
        std::string line;
        while (r.next(line)) {
            std::istringstream ss(line);
            int id, w, h;
            std::string model;
            if (!(ss >> id >> model >> w >> h)) r.fail("malformed camera line");
            CameraIntr ci{};
            ci.width = w;
            ci.height = h;
            if (model == "PINHOLE") {
                if (!(ss >> ci.fx >> ci.fy >> ci.cx >> ci.cy)) r.fail("PINHOLE needs fx fy cx cy");
            } else if (model == "SIMPLE_PINHOLE") {
                float f;
                if (!(ss >> f >> ci.cx >> ci.cy)) r.fail("SIMPLE_PINHOLE needs f cx cy");
                ci.fx = ci.fy = f;
            } else {
                r.fail("unsupported camera model: " + model);
            }
            cams[id] = ci;
        }
    }

    {
        LineReader r(dir + "/images.txt");
        std::string line;
        while (r.next(line)) {
            std::istringstream ss(line);
            int image_id, camera_id;
            float qw, qx, qy, qz, tx, ty, tz;
            std::string name;
            if (!(ss >> image_id >> qw >> qx >> qy >> qz >> tx >> ty >> tz >> camera_id >> name))
                r.fail("malformed image line");
            auto it = cams.find(camera_id);
            if (it == cams.end()) r.fail("unknown camera id " + std::to_string(camera_id));
            CameraFrame f;
            f.fx = it->second.fx;
            f.fy = it->second.fy;
            f.cx = it->second.cx;
            f.cy = it->second.cy;
            f.width = it->second.width;
            f.height = it->second.height;
            f.rotation = quat_to_mat3(quat_normalize({qw, qx, qy, qz}));
            f.translation = {tx, ty, tz};
            f.name = name;
            scene.cameras.push_back(std::move(f));
            // The second line per image lists 2D observations; may be empty.
            std::string obs;
            if (!std::getline(r.in, obs)) break;
            ++r.lineno;
        }
    }

    {
        LineReader r(dir + "/points3D.txt");
        std::string line;
        while (r.next(line)) {
            std::istringstream ss(line);
            long long id;
            float x, y, z;
            int rr, gg, bb;
            if (!(ss >> id >> x >> y >> z >> rr >> gg >> bb)) r.fail("malformed point line");
            scene.points.push_back({x, y, z});
            scene.point_colors.push_back({rr / 255.0f, gg / 255.0f, bb / 255.0f});
        }
    }

    std::sort(scene.cameras.begin(), scene.cameras.end(),
              [](const CameraFrame& a, const CameraFrame& b) { return a.name < b.name; });
    for (size_t i = 0; i < scene.cameras.size(); ++i) scene.cameras[i].t = static_cast<int>(i);
    return scene;
}

void save_colmap(const std::string& dir, const std::vector<CameraFrame>& cameras,
                 const std::vector<Vec3>& points, const std::vector<Vec3>& colors) {
    require(points.size() == colors.size(), "save_colmap: point/color count mismatch");
    {
        std::ofstream out(dir + "/cameras.txt");
        if (!out) throw IoError("cannot write " + dir + "/cameras.txt");
        out << "# Camera list with one line of data per camera:\n";
        out << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
        for (size_t i = 0; i < cameras.size(); ++i) {
            const CameraFrame& c = cameras[i];
            char buf[256];
            std::snprintf(buf, sizeof(buf), "%zu PINHOLE %d %d %.9g %.9g %.9g %.9g\n", i + 1, c.width,
                          c.height, c.fx, c.fy, c.cx, c.cy);
            out << buf;
        }
    }
    {
        std::ofstream out(dir + "/images.txt");
        if (!out) throw IoError("cannot write " + dir + "/images.txt");
        out << "# Image list with two lines of data per image:\n";
        out << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n";
        out << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
        for (size_t i = 0; i < cameras.size(); ++i) {
            const CameraFrame& c = cameras[i];
            // Rotation matrix -> quaternion (w,x,y,z), stable branch selection.
            const Mat3& m = c.rotation;
            float tr = m[0] + m[4] + m[8];
            Vec4 q;
            if (tr > 0) {
                float s = std::sqrt(tr + 1.0f) * 2;
                q = {0.25f * s, (m[7] - m[5]) / s, (m[2] - m[6]) / s, (m[3] - m[1]) / s};
            } else if (m[0] > m[4] && m[0] > m[8]) {
                float s = std::sqrt(1.0f + m[0] - m[4] - m[8]) * 2;
                q = {(m[7] - m[5]) / s, 0.25f * s, (m[1] + m[3]) / s, (m[2] + m[6]) / s};
            } else if (m[4] > m[8]) {
                float s = std::sqrt(1.0f + m[4] - m[0] - m[8]) * 2;
                q = {(m[2] - m[6]) / s, (m[1] + m[3]) / s, 0.25f * s, (m[5] + m[7]) / s};
            } else {
                float s = std::sqrt(1.0f + m[8] - m[0] - m[4]) * 2;
                q = {(m[3] - m[1]) / s, (m[2] + m[6]) / s, (m[5] + m[7]) / s, 0.25f * s};
            }
            q = quat_normalize(q);
            char buf[512];
            std::snprintf(buf, sizeof(buf), "%zu %.9g %.9g %.9g %.9g %.9g %.9g %.9g 1 %s\n\n", i + 1,
                          q[0], q[1], q[2], q[3], c.translation[0], c.translation[1], c.translation[2],
                          c.name.empty() ? ("frame_" + std::to_string(i) + ".png").c_str()
                                         : c.name.c_str());
            out << buf;
        }
    }
    {
        std::ofstream out(dir + "/points3D.txt");
        if (!out) throw IoError("cannot write " + dir + "/points3D.txt");
        out << "# 3D point list with one line of data per point:\n";
        out << "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
        for (size_t i = 0; i < points.size(); ++i) {
            char buf[256];
            std::snprintf(buf, sizeof(buf), "%zu %.9g %.9g %.9g %d %d %d 0\n", i + 1, points[i][0],
                          points[i][1], points[i][2],
                          static_cast<int>(clampf(colors[i][0], 0, 1) * 255.0f + 0.5f),
                          static_cast<int>(clampf(colors[i][1], 0, 1) * 255.0f + 0.5f),
                          static_cast<int>(clampf(colors[i][2], 0, 1) * 255.0f + 0.5f));
            out << buf;
        }
    }
}

} // namespace uwgs
