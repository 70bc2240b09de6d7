// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#include "checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace uwgs {

WaterParams Checkpoint::average_water() const {
    require(!water_history.empty(), "average_water: no water history in checkpoint");
    WaterParams avg;
    avg.ambient = {0, 0, 0};
    avg.attenuation = {0, 0, 0};
    avg.backscatter = {0, 0, 0};
    for (const WaterParams& w : water_history)
        for (int k = 0; k < 3; ++k) {
            avg.ambient[k] += w.ambient[k];
            avg.attenuation[k] += w.attenuation[k];
            avg.backscatter[k] += w.backscatter[k];
        }
    const float n = static_cast<float>(water_history.size());
    for (int k = 0; k < 3; ++k) {
        avg.ambient[k] /= n;
        avg.attenuation[k] /= n;
        avg.backscatter[k] /= n;
    }
    return avg;
}

namespace {

constexpr char kSidecarMagic[4] = {'U', 'W', 'G', 'S'};
constexpr uint32_t kSidecarVersion = 1;

const char* kPlyProps[] = {"x",       "y",       "z",       "nx",          "ny",          "nz",
                           "opacity", "scale_0", "scale_1", "scale_2",     "rot_0",       "rot_1",
                           "rot_2",   "rot_3",   "intrinsic_0", "intrinsic_1", "intrinsic_2"};
constexpr int kPlyPropCount = 17;

void write_section(std::ofstream& out, const char tag[4], const std::vector<float>& data) {
    out.write(tag, 4);
    const uint64_t count = data.size();
    out.write(reinterpret_cast<const char*>(&count), 8);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(count * 4));
}

struct SectionReader {
    std::ifstream in;
    std::string path;

    explicit SectionReader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw IoError("missing checkpoint sidecar: " + p);
    }
    bool next(std::string& tag, std::vector<float>& data) {
        char t[4];
        if (!in.read(t, 4)) return false;
        uint64_t count = 0;
        if (!in.read(reinterpret_cast<char*>(&count), 8))
            throw IoError("truncated sidecar (section header): " + path);
        data.resize(count);
        if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * 4)))
            throw IoError("truncated sidecar (section payload): " + path);
        tag.assign(t, 4);
        return true;
    }
};

} // namespace

void save_checkpoint(const std::string& ply_path, const Checkpoint& ckpt) {
    const size_t n = ckpt.cloud.size();
    {
        std::ofstream out(ply_path, std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint: " + ply_path);
        out << "ply\nformat binary_little_endian 1.0\n";
        out << "element vertex " << n << "\n";
        for (const char* p : kPlyProps) out << "property float " << p << "\n";
        out << "end_header\n";
        std::vector<float> row(kPlyPropCount);
        for (size_t i = 0; i < n; ++i) {
            row[0] = ckpt.cloud.positions[i * 3];
            row[1] = ckpt.cloud.positions[i * 3 + 1];
            row[2] = ckpt.cloud.positions[i * 3 + 2];
            row[3] = row[4] = row[5] = 0.0f; // normals kept for 3DGS tooling compatibility
            row[6] = ckpt.cloud.opacity_logits[i];
            for (int k = 0; k < 3; ++k) row[7 + k] = ckpt.cloud.log_scales[i * 3 + k];
            for (int k = 0; k < 4; ++k) row[10 + k] = ckpt.cloud.rotations[i * 4 + k];
            for (int k = 0; k < 3; ++k) row[14 + k] = ckpt.cloud.intrinsic_color_logits[i * 3 + k];
            out.write(reinterpret_cast<const char*>(row.data()), kPlyPropCount * 4);
        }
        if (!out) throw IoError("write failed: " + ply_path);
    }
    {
        std::ofstream out(ply_path + ".sdm", std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint sidecar: " + ply_path + ".sdm");
        out.write(kSidecarMagic, 4);
        out.write(reinterpret_cast<const char*>(&kSidecarVersion), 4);
        const SdmConfig& c = ckpt.sdm.cfg;
        write_section(out, "CFG0",
                      {static_cast<float>(c.net_res), static_cast<float>(c.hash_levels),
                       static_cast<float>(c.hash_log2), c.hash_base_res, c.hash_max_res,
                       static_cast<float>(c.hash_features), static_cast<float>(ckpt.step)});
        write_section(out, "BNDS", {ckpt.bounds.center[0], ckpt.bounds.center[1],
                                    ckpt.bounds.center[2], ckpt.bounds.extent});
        auto cat = [](const std::vector<ParamTensor>& grp) {
            std::vector<float> v;
            for (const ParamTensor& t : grp) v.insert(v.end(), t.data.begin(), t.data.end());
            return v;
        };
        write_section(out, "WPE0", cat(ckpt.sdm.wpe));
        write_section(out, "IBF0", cat(ckpt.sdm.ibf));
        write_section(out, "HASH", cat(ckpt.sdm.hash));
        write_section(out, "OMEG", cat(ckpt.sdm.omega));
        write_section(out, "DECO", cat(ckpt.sdm.decoder));
        std::vector<float> water;
        for (const WaterParams& w : ckpt.water_history)
            for (int k = 0; k < 3; ++k) {
                water.push_back(w.ambient[k]);
                water.push_back(w.attenuation[k]);
                water.push_back(w.backscatter[k]);
            }
        write_section(out, "WATR", water);
        if (!out) throw IoError("write failed: " + ply_path + ".sdm");
    }
}

Checkpoint load_checkpoint(const std::string& ply_path) {
    Checkpoint ckpt;
    {
        std::ifstream in(ply_path, std::ios::binary);
        if (!in) throw IoError("missing checkpoint: " + ply_path);
        std::string line;
        if (!std::getline(in, line) || line != "ply") throw ParseError("not a PLY file: " + ply_path);
        size_t n = 0;
        std::vector<std::string> props;
        bool binary_le = false;
        while (std::getline(in, line)) {
            std::istringstream ss(line);
            std::string word;
            ss >> word;
            if (word == "format") {
                std::string fmt;
                ss >> fmt;
                binary_le = (fmt == "binary_little_endian");
            } else if (word == "element") {
                std::string kind;
                ss >> kind >> n;
                if (kind != "vertex") throw ParseError("unexpected PLY element in " + ply_path);
            } else if (word == "property") {
                std::string type, name;
                ss >> type >> name;
                props.push_back(name);
            } else if (word == "end_header") {
                break;
            }
        }
        if (!binary_le) throw ParseError("checkpoint PLY must be binary little-endian: " + ply_path);
        if (props.size() != kPlyPropCount)
            throw ParseError("unexpected PLY property layout in " + ply_path);
        for (int i = 0; i < kPlyPropCount; ++i)
            if (props[i] != kPlyProps[i]) throw ParseError("unexpected PLY property order in " + ply_path);
        ckpt.cloud.resize(n);
        std::vector<float> row(kPlyPropCount);
        for (size_t i = 0; i < n; ++i) {
            if (!in.read(reinterpret_cast<char*>(row.data()), kPlyPropCount * 4))
                throw IoError("truncated checkpoint PLY: " + ply_path);
            for (int k = 0; k < 3; ++k) ckpt.cloud.positions[i * 3 + k] = row[k];
            ckpt.cloud.opacity_logits[i] = row[6];
            for (int k = 0; k < 3; ++k) ckpt.cloud.log_scales[i * 3 + k] = row[7 + k];
            for (int k = 0; k < 4; ++k) ckpt.cloud.rotations[i * 4 + k] = row[10 + k];
            for (int k = 0; k < 3; ++k) ckpt.cloud.intrinsic_color_logits[i * 3 + k] = row[14 + k];
        }
    }
    {
        SectionReader r(ply_path + ".sdm");
        char magic[4];
        uint32_t version = 0;
        if (!r.in.read(magic, 4) || std::memcmp(magic, kSidecarMagic, 4) != 0)
            throw ParseError("bad sidecar magic: " + ply_path + ".sdm");
        if (!r.in.read(reinterpret_cast<char*>(&version), 4) || version != kSidecarVersion)
            throw ParseError("unsupported sidecar version in " + ply_path + ".sdm");

        std::string tag;
        std::vector<float> data;
        bool have_cfg = false;
        SdmConfig cfg;
        auto scatter = [&](std::vector<ParamTensor>& grp, const std::vector<float>& v,
                           const char* what) {
            size_t total = 0;
            for (const ParamTensor& t : grp) total += t.data.size();
            if (total != v.size())
                throw ParseError(std::string("sidecar section size mismatch for ") + what);
            size_t o = 0;
            for (ParamTensor& t : grp) {
                std::copy(v.begin() + o, v.begin() + o + t.data.size(), t.data.begin());
                o += t.data.size();
            }
        };
        while (r.next(tag, data)) {
            if (tag == "CFG0") {
                if (data.size() < 7) throw ParseError("bad CFG0 section");
                cfg.net_res = static_cast<int>(data[0]);
                cfg.hash_levels = static_cast<int>(data[1]);
                cfg.hash_log2 = static_cast<int>(data[2]);
                cfg.hash_base_res = data[3];
                cfg.hash_max_res = data[4];
                cfg.hash_features = static_cast<int>(data[5]);
                ckpt.step = static_cast<int>(data[6]);
                ckpt.sdm = init_sdm(cfg, 0);
                have_cfg = true;
            } else if (tag == "BNDS") {
                if (data.size() != 4) throw ParseError("bad BNDS section");
                ckpt.bounds.center = {data[0], data[1], data[2]};
                ckpt.bounds.extent = data[3];
            } else if (tag == "WPE0") {
                require(have_cfg, "sidecar: CFG0 must precede weights");
                scatter(ckpt.sdm.wpe, data, "WPE0");
            } else if (tag == "IBF0") {
                require(have_cfg, "sidecar: CFG0 must precede weights");
                scatter(ckpt.sdm.ibf, data, "IBF0");
            } else if (tag == "HASH") {
                require(have_cfg, "sidecar: CFG0 must precede weights");
                scatter(ckpt.sdm.hash, data, "HASH");
            } else if (tag == "OMEG") {
                require(have_cfg, "sidecar: CFG0 must precede weights");
                scatter(ckpt.sdm.omega, data, "OMEG");
            } else if (tag == "DECO") {
                require(have_cfg, "sidecar: CFG0 must precede weights");
                scatter(ckpt.sdm.decoder, data, "DECO");
            } else if (tag == "WATR") {
                if (data.size() % 9 != 0) throw ParseError("bad WATR section");
                for (size_t i = 0; i < data.size(); i += 9) {
                    WaterParams w;
                    for (int k = 0; k < 3; ++k) {
                        w.ambient[k] = data[i + k * 3];
                        w.attenuation[k] = data[i + k * 3 + 1];
                        w.backscatter[k] = data[i + k * 3 + 2];
                    }
                    ckpt.water_history.push_back(w);
                }
            }
            // Unknown tags are skipped for forward compatibility.
        }
        if (!have_cfg) throw ParseError("sidecar missing CFG0 section: " + ply_path + ".sdm");
    }
    return ckpt;
}

} // namespace uwgs
