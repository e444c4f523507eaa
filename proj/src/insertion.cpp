#include "scenegraft/insertion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace scenegraft {

std::size_t OccupancyGrid::free_count() const {
    return static_cast<std::size_t>(std::count(free.begin(), free.end(), std::uint8_t{1}));
}

FloorPlane detect_floor(const Scene& scene, const InsertionConfig& cfg) {
    const auto& pts = scene.cloud.positions;
    if (pts.size() < cfg.min_floor_inliers) {
        throw ValidationError("no floor: scene has " + std::to_string(pts.size()) +
                              " points, need at least " + std::to_string(cfg.min_floor_inliers));
    }
    std::vector<double> zs(pts.size());
    std::transform(pts.begin(), pts.end(), zs.begin(), [](const Vec3& p) { return p.z; });
    std::sort(zs.begin(), zs.end());

    // Robust minimum: 1st percentile, which discards stray low outliers.
    const double robust_min = zs[static_cast<std::size_t>(0.01 * (zs.size() - 1))];

    std::vector<double> slab;
    for (double z : zs) {
        if (z < robust_min - cfg.delta_floor) continue;
        if (z > robust_min + cfg.delta_floor) break;
        slab.push_back(z);
    }
    if (slab.size() < cfg.min_floor_inliers) {
        throw ValidationError("no floor: only " + std::to_string(slab.size()) +
                              " points within the floor slab");
    }
    const double z_floor = slab[slab.size() / 2];

    std::size_t inliers = 0;
    for (double z : zs) {
        if (std::abs(z - z_floor) <= cfg.delta_floor) ++inliers;
    }
    if (inliers < cfg.min_floor_inliers) {
        throw ValidationError("no floor: insufficient inliers around z=" + std::to_string(z_floor));
    }
    return {z_floor, inliers};
}

OccupancyGrid build_floor_map(const Scene& scene, const FloorPlane& floor, double cell_size,
                              const InsertionConfig& cfg) {
    if (cell_size <= 0) throw ValidationError("cell_size must be positive");
    const AxisBox box = scene.aabb();
    const Vec3 lo = box.min(), hi = box.max();

    OccupancyGrid grid;
    grid.origin_x = lo.x;
    grid.origin_y = lo.y;
    grid.cell_size = cell_size;
    grid.width = std::max(1, static_cast<int>(std::ceil((hi.x - lo.x) / cell_size)));
    grid.height = std::max(1, static_cast<int>(std::ceil((hi.y - lo.y) / cell_size)));
    grid.free.assign(static_cast<std::size_t>(grid.width) * grid.height, 1);

    const double z_lo = floor.z + cfg.eps_floor;
    const double z_hi = cfg.z_ceiling;
    for (const auto& obj : scene.objects) {
        for (const auto& range : obj.point_ranges) {
            for (std::uint32_t i = range.begin; i < range.end; ++i) {
                const Vec3& p = scene.cloud.positions[i];
                if (p.z <= z_lo || p.z >= z_hi) continue;
                const int ix = static_cast<int>(std::floor((p.x - grid.origin_x) / cell_size));
                const int iy = static_cast<int>(std::floor((p.y - grid.origin_y) / cell_size));
                if (ix < 0 || ix >= grid.width || iy < 0 || iy >= grid.height) continue;
                grid.set_free(ix, iy, false);
            }
        }
    }
    return grid;
}

OccupancyGrid erode_free(const OccupancyGrid& grid, int kx, int ky) {
    if (kx < 0 || ky < 0) throw ValidationError("erosion kernel half-extents must be >= 0");
    OccupancyGrid out = grid;
    if (kx == 0 && ky == 0) return out;

    // Separable min filter: rows by kx, then columns by ky. Out-of-bounds
    // counts as occupied.
    OccupancyGrid tmp = grid;
    for (int iy = 0; iy < grid.height; ++iy) {
        for (int ix = 0; ix < grid.width; ++ix) {
            bool ok = ix - kx >= 0 && ix + kx < grid.width;
            for (int dx = -kx; ok && dx <= kx; ++dx) {
                if (!grid.is_free(ix + dx, iy)) ok = false;
            }
            tmp.set_free(ix, iy, ok);
        }
    }
    for (int iy = 0; iy < grid.height; ++iy) {
        for (int ix = 0; ix < grid.width; ++ix) {
            bool ok = iy - ky >= 0 && iy + ky < grid.height;
            for (int dy = -ky; ok && dy <= ky; ++dy) {
                if (!tmp.is_free(ix, iy + dy)) ok = false;
            }
            out.set_free(ix, iy, ok);
        }
    }
    return out;
}

int rotation_safe_kernel(const SceneObject& object, double cell_size, const InsertionConfig& cfg) {
    const double hx = object.box.size.x / 2 * cfg.scale_jitter_hi + cfg.margin;
    const double hy = object.box.size.y / 2 * cfg.scale_jitter_hi + cfg.margin;
    const double radius = std::hypot(hx, hy);
    // +0.5 covers the offset between the placement point (a cell center) and
    // the farthest cell the footprint can touch.
    return static_cast<int>(std::ceil(radius / cell_size + 0.5));
}

std::optional<PlacementTransform> sample_placement(Rng& rng, const SceneObject& /*object*/,
                                                   const OccupancyGrid& free, const FloorPlane& floor,
                                                   const InsertionConfig& cfg) {
    std::vector<std::size_t> free_cells;
    for (std::size_t i = 0; i < free.free.size(); ++i) {
        if (free.free[i]) free_cells.push_back(i);
    }
    if (free_cells.empty()) return std::nullopt;

    const std::size_t cell = free_cells[rng.uniform_index(free_cells.size())];
    const int ix = static_cast<int>(cell % free.width);
    const int iy = static_cast<int>(cell / free.width);

    PlacementTransform t;
    t.translation = {free.cell_center_x(ix), free.cell_center_y(iy), floor.z};
    t.yaw = rng.uniform(0.0, 2.0 * M_PI);
    t.flip_x = rng.bernoulli(cfg.flip_prob);
    t.scale_jitter = rng.uniform(cfg.scale_jitter_lo, cfg.scale_jitter_hi);
    return t;
}

namespace {

// Transform candidate points into their placed position. Points are taken
// to the candidate's box frame, flipped/scaled there, rotated to the
// sampled yaw, and translated so the lowest point lands on the floor.
struct PlacedPoints {
    std::vector<Vec3> positions;
    Vec3 box_center;  // where the candidate's box center ends up
};

PlacedPoints transform_candidate(const BankEntry& entry, const PlacementTransform& t,
                                 const FloorPlane& floor) {
    const OrientedBox& src = entry.object->box;
    std::vector<Vec3> local;
    for (const auto& range : entry.object->point_ranges) {
        for (std::uint32_t i = range.begin; i < range.end; ++i) {
            Vec3 q = src.to_local(entry.source->cloud.positions[i]);
            if (t.flip_x) q.x = -q.x;
            local.push_back(q * t.scale_jitter);
        }
    }

    const double c = std::cos(t.yaw), s = std::sin(t.yaw);
    double min_z = local.empty() ? 0.0 : local.front().z;
    for (const auto& q : local) min_z = std::min(min_z, q.z);
    const double tz = floor.z - min_z;

    PlacedPoints out;
    out.positions.reserve(local.size());
    for (const auto& q : local) {
        out.positions.push_back({c * q.x - s * q.y + t.translation.x,
                                 s * q.x + c * q.y + t.translation.y, q.z + tz});
    }
    out.box_center = {t.translation.x, t.translation.y, tz};
    return out;
}

}  // namespace

std::optional<InsertionResult> insert_object(const Scene& scene, const std::vector<BankEntry>& bank,
                                             Rng& rng, const InsertionConfig& cfg,
                                             int* attempts_out) {
    if (cfg.max_attempts < 1) throw ConfigError("insertion retry limit must be >= 1");
    if (bank.empty()) throw ConfigError("insertion bank is empty");

    std::vector<const BankEntry*> standers;
    for (const auto& e : bank) {
        if (e.object->is_stander) standers.push_back(&e);
    }
    if (standers.empty()) throw ConfigError("insertion bank contains no stander objects");

    const FloorPlane floor = detect_floor(scene, cfg);
    const OccupancyGrid base = build_floor_map(scene, floor, cfg.cell_size, cfg);

    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
        const BankEntry& candidate = *standers[rng.uniform_index(standers.size())];
        const int k = rotation_safe_kernel(*candidate.object, cfg.cell_size, cfg);
        const OccupancyGrid eroded = erode_free(base, k, k);
        auto placement = sample_placement(rng, *candidate.object, eroded, floor, cfg);
        if (!placement) continue;

        PlacedPoints placed = transform_candidate(candidate, *placement, floor);
        if (placed.positions.empty()) continue;  // candidate without points

        InsertionResult result;
        result.augmented_scene = scene;
        result.attempts = attempt;

        const auto start = static_cast<std::uint32_t>(result.augmented_scene.cloud.size());
        std::size_t src_i = 0;
        for (const auto& range : candidate.object->point_ranges) {
            for (std::uint32_t i = range.begin; i < range.end; ++i, ++src_i) {
                result.augmented_scene.cloud.positions.push_back(placed.positions[src_i]);
                result.augmented_scene.cloud.colors.push_back(candidate.source->cloud.colors[i]);
            }
        }

        int max_id = -1;
        for (const auto& o : scene.objects) max_id = std::max(max_id, o.id);

        SceneObject obj;
        obj.id = max_id + 1;
        obj.label = candidate.object->label;
        obj.box = {placed.box_center, candidate.object->box.size * placement->scale_jitter,
                   wrap_angle(placement->yaw)};
        obj.point_ranges = {{start, static_cast<std::uint32_t>(result.augmented_scene.cloud.size())}};
        obj.is_stander = true;
        result.augmented_scene.objects.push_back(obj);

        result.inserted = obj;
        result.location = obj.box.aabb();
        if (attempts_out) *attempts_out = attempt;
        return result;
    }
    if (attempts_out) *attempts_out = cfg.max_attempts;
    return std::nullopt;
}

bool brute_force_clearance(const Scene& scene, const OrientedBox& placed, const FloorPlane& floor,
                           const InsertionConfig& cfg) {
    const double z_lo = floor.z + cfg.eps_floor;
    const double z_hi = cfg.z_ceiling;
    const double hx = placed.size.x / 2 + cfg.margin;
    const double hy = placed.size.y / 2 + cfg.margin;
    const double hz = placed.size.z / 2 + cfg.margin;
    for (const auto& obj : scene.objects) {
        for (const auto& range : obj.point_ranges) {
            for (std::uint32_t i = range.begin; i < range.end; ++i) {
                const Vec3& p = scene.cloud.positions[i];
                if (p.z <= z_lo || p.z >= z_hi) continue;
                const Vec3 q = placed.to_local(p);
                if (std::abs(q.x) <= hx && std::abs(q.y) <= hy && std::abs(q.z) <= hz) return false;
            }
        }
    }
    return true;
}

}  // namespace scenegraft
