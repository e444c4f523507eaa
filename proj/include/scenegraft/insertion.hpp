#pragma once

#include <optional>
#include <vector>

#include "scenegraft/rng.hpp"
#include "scenegraft/scene.hpp"

namespace scenegraft {

struct FloorPlane {
    double z = 0.0;
    std::size_t inlier_count = 0;
};

// 2D raster over the scene footprint. A cell is free when no existing
// object point in the occupancy z band projects into it.
struct OccupancyGrid {
    double origin_x = 0.0, origin_y = 0.0;
    double cell_size = 0.0;
    int width = 0, height = 0;
    std::vector<std::uint8_t> free;  // row-major, 1 = free

    bool is_free(int ix, int iy) const { return free[static_cast<std::size_t>(iy) * width + ix] != 0; }
    void set_free(int ix, int iy, bool v) {
        free[static_cast<std::size_t>(iy) * width + ix] = v ? 1 : 0;
    }
    std::size_t free_count() const;
    double cell_center_x(int ix) const { return origin_x + (ix + 0.5) * cell_size; }
    double cell_center_y(int iy) const { return origin_y + (iy + 0.5) * cell_size; }
};

struct PlacementTransform {
    Vec3 translation;
    double yaw = 0.0;
    bool flip_x = false;
    double scale_jitter = 1.0;
};

struct InsertionResult {
    Scene augmented_scene;
    SceneObject inserted;   // as it appears in augmented_scene (last object)
    AxisBox location;       // axis-aligned bounds of the placed object
    int attempts = 0;
};

// A candidate for insertion: an object plus the scene that owns its points.
struct BankEntry {
    const Scene* source = nullptr;
    const SceneObject* object = nullptr;
};

struct InsertionConfig {
    double delta_floor = 0.05;      // slab half-thickness for floor detection
    std::size_t min_floor_inliers = 100;
    double eps_floor = 0.05;        // occupancy band starts this far above the floor
    double z_ceiling = 2.0;         // and ends here (absolute z above floor)
    double cell_size = 0.02;
    double margin = 0.02;           // clearance margin around the footprint
    double scale_jitter_lo = 0.95;
    double scale_jitter_hi = 1.05;
    double flip_prob = 0.5;
    int max_attempts = 1000;        // T
};

FloorPlane detect_floor(const Scene& scene, const InsertionConfig& cfg = {});

OccupancyGrid build_floor_map(const Scene& scene, const FloorPlane& floor, double cell_size,
                              const InsertionConfig& cfg = {});

// Morphological erosion of the free mask by a (2*kx+1) x (2*ky+1) window.
// Cells outside the grid count as occupied, so a free output cell
// guarantees the whole window lies on free cells inside the grid.
OccupancyGrid erode_free(const OccupancyGrid& grid, int kx, int ky);

// Draw a placement from the eroded free mask. Draw order is fixed:
// cell, yaw, flip, scale. Returns nothing when no free cell exists.
std::optional<PlacementTransform> sample_placement(Rng& rng, const SceneObject& object,
                                                   const OccupancyGrid& free, const FloorPlane& floor,
                                                   const InsertionConfig& cfg = {});

// Kernel half-extent (in cells) that keeps erosion conservative for any yaw
// drawn later: circumradius of the margin-expanded footprint at the top of
// the scale jitter band.
int rotation_safe_kernel(const SceneObject& object, double cell_size, const InsertionConfig& cfg);

// Algorithm: up to T attempts of (pick stander candidate, erode, place).
// Returns nothing after T failed attempts; attempts_out then holds T.
std::optional<InsertionResult> insert_object(const Scene& scene, const std::vector<BankEntry>& bank,
                                             Rng& rng, const InsertionConfig& cfg = {},
                                             int* attempts_out = nullptr);

// Exact point-in-oriented-box check against every existing object point in
// the occupancy z band; the independent oracle for the erosion shortcut.
bool brute_force_clearance(const Scene& scene, const OrientedBox& placed, const FloorPlane& floor,
                           const InsertionConfig& cfg = {});

}  // namespace scenegraft
