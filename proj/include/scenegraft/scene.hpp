#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scenegraft/errors.hpp"
#include "scenegraft/geometry.hpp"

namespace scenegraft {

using Rgb = std::array<std::uint8_t, 3>;

struct PointCloud {
    std::vector<Vec3> positions;
    std::vector<Rgb> colors;

    std::size_t size() const { return positions.size(); }
};

// Half-open index range [begin, end) into the owning scene's cloud.
struct IndexRange {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
};

struct SceneObject {
    int id = 0;
    std::string label;
    OrientedBox box;
    std::vector<IndexRange> point_ranges;
    bool is_stander = false;

    std::size_t point_count() const {
        std::size_t n = 0;
        for (const auto& r : point_ranges) n += r.end - r.begin;
        return n;
    }
};

struct Scene {
    std::string id;
    PointCloud cloud;
    std::vector<SceneObject> objects;

    AxisBox aabb() const;
};

// Shipped stander/hanger category table. Unknown labels default to stander
// (most furniture rests on the floor). Callers may pass overrides that win
// over the table.
bool is_stander_category(const std::string& label);

// ---------------------------------------------------------------------------
// File I/O. Point clouds use the PLY profile documented in
// docs/file_formats.md (x,y,z float32 + red,green,blue uchar; ASCII or
// binary little-endian). Annotations are a JSON sidecar manifest.

Scene load_scene(const std::filesystem::path& cloud_path,
                 const std::filesystem::path& annotation_path);

struct SavedScenePaths {
    std::filesystem::path cloud;
    std::filesystem::path annotations;
};

SavedScenePaths save_scene(const Scene& scene, const std::filesystem::path& out_dir,
                           bool binary = true);

// ---------------------------------------------------------------------------
// Synthetic test scenes: a floor slab at z in [0, 1cm] plus surface-sampled
// boxes, each annotated. Pure function of (spec, seed).

struct ObjectSpec {
    std::string label;
    double cx = 0.0, cy = 0.0;          // box center on the floor plan
    double sx = 0.0, sy = 0.0, sz = 0.0;  // full extents
    double yaw = 0.0;
    std::optional<bool> is_stander;     // defaults to the category table
};

struct RoomSpec {
    double size_x = 4.0;
    double size_y = 4.0;
    double height = 2.5;
    double floor_density = 100.0;    // points per m^2 of floor
    double surface_density = 200.0;  // points per m^2 of object surface
    std::vector<ObjectSpec> objects;
};

Scene synthesize_test_scene(const RoomSpec& spec, std::uint64_t seed,
                            const std::string& scene_id = "synthetic");

}  // namespace scenegraft
