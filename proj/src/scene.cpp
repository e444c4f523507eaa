#include "scenegraft/scene.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "scenegraft/rng.hpp"

namespace scenegraft {

using json = nlohmann::ordered_json;

AxisBox Scene::aabb() const {
    if (cloud.positions.empty()) throw ValidationError("scene AABB undefined: no points");
    Vec3 lo = cloud.positions.front(), hi = lo;
    for (const auto& p : cloud.positions) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
        hi.z = std::max(hi.z, p.z);
    }
    return {{(lo.x + hi.x) / 2, (lo.y + hi.y) / 2, (lo.z + hi.z) / 2},
            {hi.x - lo.x, hi.y - lo.y, hi.z - lo.z}};
}

bool is_stander_category(const std::string& label) {
    static const std::set<std::string> hangers = {
        "window", "curtain", "picture", "mirror", "painting",
        "poster",  "whiteboard", "tv", "clock", "blinds"};
    std::string lower;
    lower.reserve(label.size());
    for (char c : label) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return hangers.count(lower) == 0;
}

// ---------------------------------------------------------------------------
// PLY

namespace {

struct PlyHeader {
    bool binary = false;
    std::size_t vertex_count = 0;
    std::size_t data_offset = 0;  // byte offset of the first vertex record
};

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t offset,
                             const std::string& what) {
    throw ParseError(path.string() + ": byte " + std::to_string(offset) + ": " + what);
}

PlyHeader parse_ply_header(const std::string& data, const std::filesystem::path& path) {
    PlyHeader hdr;
    std::size_t pos = 0;
    int property_index = 0;
    static const char* expected_props[6] = {"float x",  "float y",    "float z",
                                            "uchar red", "uchar green", "uchar blue"};
    bool saw_magic = false, saw_format = false, saw_vertex = false;
    while (true) {
        std::size_t eol = data.find('\n', pos);
        if (eol == std::string::npos) parse_fail(path, pos, "unterminated header line");
        std::string line = data.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t line_start = pos;
        pos = eol + 1;

        if (!saw_magic) {
            if (line != "ply") parse_fail(path, line_start, "expected 'ply' magic");
            saw_magic = true;
            continue;
        }
        if (line.rfind("comment", 0) == 0) continue;
        if (line.rfind("format", 0) == 0) {
            if (line == "format ascii 1.0") {
                hdr.binary = false;
            } else if (line == "format binary_little_endian 1.0") {
                hdr.binary = true;
            } else {
                parse_fail(path, line_start, "unsupported format: '" + line + "'");
            }
            saw_format = true;
            continue;
        }
        if (line.rfind("element vertex ", 0) == 0) {
            hdr.vertex_count = std::strtoull(line.c_str() + 15, nullptr, 10);
            saw_vertex = true;
            continue;
        }
        if (line.rfind("element", 0) == 0) {
            parse_fail(path, line_start, "unsupported element: '" + line + "'");
        }
        if (line.rfind("property ", 0) == 0) {
            if (property_index >= 6 || line.substr(9) != expected_props[property_index]) {
                parse_fail(path, line_start,
                           "property " + std::to_string(property_index) +
                               " must be '" + (property_index < 6 ? expected_props[property_index] : "<none>") +
                               "', got '" + line.substr(9) + "'");
            }
            ++property_index;
            continue;
        }
        if (line == "end_header") {
            if (!saw_format) parse_fail(path, line_start, "missing format line");
            if (!saw_vertex) parse_fail(path, line_start, "missing 'element vertex'");
            if (property_index != 6) parse_fail(path, line_start, "expected 6 vertex properties");
            hdr.data_offset = pos;
            return hdr;
        }
        parse_fail(path, line_start, "unrecognized header line: '" + line + "'");
    }
}

PointCloud read_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open point cloud file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string data = buf.str();

    const PlyHeader hdr = parse_ply_header(data, path);
    PointCloud cloud;
    cloud.positions.reserve(hdr.vertex_count);
    cloud.colors.reserve(hdr.vertex_count);

    if (hdr.binary) {
        constexpr std::size_t record = 3 * sizeof(float) + 3;
        if (data.size() - hdr.data_offset < record * hdr.vertex_count) {
            parse_fail(path, data.size(), "truncated binary vertex data (need " +
                                              std::to_string(record * hdr.vertex_count) + " bytes)");
        }
        const char* p = data.data() + hdr.data_offset;
        for (std::size_t i = 0; i < hdr.vertex_count; ++i) {
            float xyz[3];
            std::memcpy(xyz, p, sizeof(xyz));
            p += sizeof(xyz);
            Rgb rgb = {static_cast<std::uint8_t>(p[0]), static_cast<std::uint8_t>(p[1]),
                       static_cast<std::uint8_t>(p[2])};
            p += 3;
            if (!std::isfinite(xyz[0]) || !std::isfinite(xyz[1]) || !std::isfinite(xyz[2])) {
                parse_fail(path, hdr.data_offset + i * record, "non-finite coordinate in vertex " + std::to_string(i));
            }
            cloud.positions.push_back({xyz[0], xyz[1], xyz[2]});
            cloud.colors.push_back(rgb);
        }
    } else {
        std::size_t pos = hdr.data_offset;
        for (std::size_t i = 0; i < hdr.vertex_count; ++i) {
            std::size_t eol = data.find('\n', pos);
            if (eol == std::string::npos) eol = data.size();
            if (pos >= data.size()) parse_fail(path, pos, "missing vertex " + std::to_string(i));
            const char* s = data.c_str() + pos;
            char* end = nullptr;
            double v[6];
            for (int f = 0; f < 6; ++f) {
                v[f] = std::strtod(s, &end);
                if (end == s) {
                    parse_fail(path, pos, "vertex " + std::to_string(i) + ": cannot parse field " +
                                              std::to_string(f));
                }
                s = end;
            }
            if (!std::isfinite(v[0]) || !std::isfinite(v[1]) || !std::isfinite(v[2])) {
                parse_fail(path, pos, "non-finite coordinate in vertex " + std::to_string(i));
            }
            cloud.positions.push_back({v[0], v[1], v[2]});
            cloud.colors.push_back({static_cast<std::uint8_t>(v[3]), static_cast<std::uint8_t>(v[4]),
                                    static_cast<std::uint8_t>(v[5])});
            pos = eol + 1;
        }
    }
    return cloud;
}

void write_ply(const PointCloud& cloud, const std::filesystem::path& path, bool binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write point cloud file: " + path.string());
    out << "ply\n"
        << (binary ? "format binary_little_endian 1.0" : "format ascii 1.0") << "\n"
        << "element vertex " << cloud.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        << "end_header\n";
    if (binary) {
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const float xyz[3] = {static_cast<float>(cloud.positions[i].x),
                                  static_cast<float>(cloud.positions[i].y),
                                  static_cast<float>(cloud.positions[i].z)};
            out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
            out.write(reinterpret_cast<const char*>(cloud.colors[i].data()), 3);
        }
    } else {
        char line[128];
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            std::snprintf(line, sizeof(line), "%.9g %.9g %.9g %u %u %u\n",
                          static_cast<float>(cloud.positions[i].x),
                          static_cast<float>(cloud.positions[i].y),
                          static_cast<float>(cloud.positions[i].z), cloud.colors[i][0],
                          cloud.colors[i][1], cloud.colors[i][2]);
            out << line;
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

// ---------------------------------------------------------------------------
// Annotation manifest (JSON sidecar, schema in docs/file_formats.md)

namespace {

constexpr int kAnnotationSchemaVersion = 1;

json box_to_json(const OrientedBox& b) {
    return json{{"center", {b.center.x, b.center.y, b.center.z}},
                {"size", {b.size.x, b.size.y, b.size.z}},
                {"yaw", b.yaw}};
}

OrientedBox box_from_json(const json& j) {
    OrientedBox b;
    b.center = {j.at("center").at(0), j.at("center").at(1), j.at("center").at(2)};
    b.size = {j.at("size").at(0), j.at("size").at(1), j.at("size").at(2)};
    b.yaw = j.at("yaw");
    return b;
}

}  // namespace

Scene load_scene(const std::filesystem::path& cloud_path,
                 const std::filesystem::path& annotation_path) {
    Scene scene;
    scene.cloud = read_ply(cloud_path);

    std::ifstream in(annotation_path);
    if (!in) throw IoError("cannot open annotation file: " + annotation_path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(annotation_path.string() + ": byte " + std::to_string(e.byte) + ": " +
                         e.what());
    }
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != kAnnotationSchemaVersion) {
        throw ParseError(annotation_path.string() + ": missing or unsupported schema_version");
    }
    scene.id = j.value("scene_id", cloud_path.stem().string());
    for (const auto& jo : j.at("objects")) {
        SceneObject obj;
        obj.id = jo.at("id");
        obj.label = jo.at("label");
        obj.box = box_from_json(jo.at("box"));
        obj.is_stander = jo.at("is_stander");
        for (const auto& jr : jo.at("point_ranges")) {
            IndexRange r{jr.at(0), jr.at(1)};
            if (r.begin > r.end || r.end > scene.cloud.size()) {
                throw ValidationError(annotation_path.string() + ": object id " +
                                      std::to_string(obj.id) + " references point range [" +
                                      std::to_string(r.begin) + ", " + std::to_string(r.end) +
                                      ") beyond cloud size " + std::to_string(scene.cloud.size()));
            }
            obj.point_ranges.push_back(r);
        }
        if (obj.box.size.x < 0 || obj.box.size.y < 0 || obj.box.size.z < 0) {
            throw ValidationError(annotation_path.string() + ": object id " +
                                  std::to_string(obj.id) + " has negative box size");
        }
        obj.box.yaw = wrap_angle(obj.box.yaw);
        scene.objects.push_back(std::move(obj));
    }
    return scene;
}

SavedScenePaths save_scene(const Scene& scene, const std::filesystem::path& out_dir, bool binary) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!std::filesystem::is_directory(out_dir)) {
        throw IoError("output directory unavailable: " + out_dir.string());
    }
    SavedScenePaths paths;
    paths.cloud = out_dir / (scene.id + ".ply");
    paths.annotations = out_dir / (scene.id + ".json");

    write_ply(scene.cloud, paths.cloud, binary);

    json j;
    j["schema_version"] = kAnnotationSchemaVersion;
    j["scene_id"] = scene.id;
    j["objects"] = json::array();
    for (const auto& obj : scene.objects) {
        json jo;
        jo["id"] = obj.id;
        jo["label"] = obj.label;
        jo["box"] = box_to_json(obj.box);
        jo["is_stander"] = obj.is_stander;
        jo["point_ranges"] = json::array();
        for (const auto& r : obj.point_ranges) jo["point_ranges"].push_back({r.begin, r.end});
        j["objects"].push_back(std::move(jo));
    }
    std::ofstream out(paths.annotations);
    if (!out) throw IoError("cannot write annotation file: " + paths.annotations.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + paths.annotations.string());
    return paths;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

namespace {

Vec3 rotate_z(const Vec3& p, double yaw) {
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

void validate_object_spec(const RoomSpec& room, const ObjectSpec& o) {
    if (o.sx <= 0 || o.sy <= 0 || o.sz <= 0) {
        throw ValidationError("object '" + o.label + "' has non-positive size");
    }
    const double c = std::abs(std::cos(o.yaw)), s = std::abs(std::sin(o.yaw));
    const double hx = (o.sx * c + o.sy * s) / 2;
    const double hy = (o.sx * s + o.sy * c) / 2;
    if (o.cx - hx < 0 || o.cx + hx > room.size_x || o.cy - hy < 0 || o.cy + hy > room.size_y ||
        o.sz > room.height) {
        throw ValidationError("object '" + o.label + "' does not fit inside the room");
    }
}

}  // namespace

Scene synthesize_test_scene(const RoomSpec& spec, std::uint64_t seed, const std::string& scene_id) {
    if (spec.size_x <= 0 || spec.size_y <= 0 || spec.height <= 0) {
        throw ValidationError("room dimensions must be positive");
    }
    for (const auto& o : spec.objects) validate_object_spec(spec, o);

    Rng rng(seed);
    Scene scene;
    scene.id = scene_id;

    // Floor slab: z uniform in [0, 1cm] so the detected plane sits near 5mm.
    const auto floor_count =
        static_cast<std::size_t>(std::ceil(spec.size_x * spec.size_y * spec.floor_density));
    for (std::size_t i = 0; i < floor_count; ++i) {
        const double x = rng.uniform(0.0, spec.size_x);
        const double y = rng.uniform(0.0, spec.size_y);
        const double z = rng.uniform(0.0, 0.01);
        const auto g = static_cast<std::uint8_t>(120 + rng.uniform_index(20));
        scene.cloud.positions.push_back({x, y, z});
        scene.cloud.colors.push_back({g, g, g});
    }

    int next_id = 0;
    for (const auto& o : spec.objects) {
        const double face_areas[3] = {o.sy * o.sz, o.sx * o.sz, o.sx * o.sy};  // +-x, +-y, +-z
        const double area = 2 * (face_areas[0] + face_areas[1] + face_areas[2]);
        const auto count =
            std::max<std::size_t>(50, static_cast<std::size_t>(std::ceil(area * spec.surface_density)));
        const Vec3 center{o.cx, o.cy, o.sz / 2};

        const Rgb base = {static_cast<std::uint8_t>(40 + rng.uniform_index(180)),
                          static_cast<std::uint8_t>(40 + rng.uniform_index(180)),
                          static_cast<std::uint8_t>(40 + rng.uniform_index(180))};

        const auto start = static_cast<std::uint32_t>(scene.cloud.size());
        for (std::size_t i = 0; i < count; ++i) {
            const double pick = rng.uniform(0.0, area);
            int axis = 0;
            double acc = 2 * face_areas[0];
            if (pick >= acc) {
                axis = 1;
                acc += 2 * face_areas[1];
                if (pick >= acc) axis = 2;
            }
            const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
            const double u = rng.uniform(-0.5, 0.5), v = rng.uniform(-0.5, 0.5);
            Vec3 q;
            switch (axis) {
                case 0: q = {sign * o.sx / 2, u * o.sy, v * o.sz}; break;
                case 1: q = {u * o.sx, sign * o.sy / 2, v * o.sz}; break;
                default: q = {u * o.sx, v * o.sy, sign * o.sz / 2}; break;
            }
            const Vec3 p = rotate_z(q, o.yaw) + center;
            auto shade = [&](std::uint8_t b) {
                const int d = static_cast<int>(rng.uniform_index(21)) - 10;
                return static_cast<std::uint8_t>(std::clamp(b + d, 0, 255));
            };
            scene.cloud.positions.push_back(p);
            scene.cloud.colors.push_back({shade(base[0]), shade(base[1]), shade(base[2])});
        }

        SceneObject obj;
        obj.id = next_id++;
        obj.label = o.label;
        obj.box = {center, {o.sx, o.sy, o.sz}, wrap_angle(o.yaw)};
        obj.point_ranges = {{start, static_cast<std::uint32_t>(scene.cloud.size())}};
        obj.is_stander = o.is_stander.value_or(is_stander_category(o.label));
        scene.objects.push_back(std::move(obj));
    }
    return scene;
}

}  // namespace scenegraft
