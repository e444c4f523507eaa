#include "scenegraft/rendering.hpp"

#include <algorithm>
#include <cmath>

namespace scenegraft {

const char* level_name(Level level) {
    switch (level) {
        case Level::Object: return "object";
        case Level::Local: return "local";
        case Level::Scene: return "scene";
    }
    return "?";
}

Level level_from_name(const std::string& name) {
    if (name == "object") return Level::Object;
    if (name == "local") return Level::Local;
    if (name == "scene") return Level::Scene;
    throw ValidationError("unknown level: '" + name + "'");
}

namespace {

double target_radius(const Scene& scene, const SceneObject& target) {
    double r = 0.0;
    for (const auto& range : target.point_ranges) {
        for (std::uint32_t i = range.begin; i < range.end; ++i) {
            r = std::max(r, (scene.cloud.positions[i] - target.box.center).norm());
        }
    }
    if (r == 0.0) r = target.box.size.norm() / 2;  // no points: fall back to the box
    return r;
}

}  // namespace

std::vector<CameraPose> plan_cameras(const Scene& scene, const SceneObject& target,
                                     const AxisBox& scene_box, Level level, int n_azimuth,
                                     const RenderConfig& cfg) {
    if (n_azimuth < 1) throw ValidationError("n_azimuth must be >= 1");
    const double r_target = target_radius(scene, target);
    if (r_target <= 0.0) throw ValidationError("degenerate target: zero-size box and no points");

    double frame_radius = 0.0;
    switch (level) {
        case Level::Object: frame_radius = r_target / cfg.fill; break;
        case Level::Local: frame_radius = r_target + cfg.rho_local; break;
        case Level::Scene: frame_radius = scene_box.size.norm() / 2; break;
    }
    const double distance = frame_radius / std::tan(cfg.intrinsics.vertical_fov / 2);

    std::vector<CameraPose> poses;
    const Vec3 center = target.box.center;
    for (int elevation : {0, 45, 90}) {
        const int n = elevation == 90 ? 1 : n_azimuth;  // top-down poses all coincide
        for (int k = 0; k < n; ++k) {
            const double az = 360.0 * k / n_azimuth;
            const double e = elevation * M_PI / 180.0, a = az * M_PI / 180.0;
            CameraPose pose;
            pose.position = center + distance * Vec3{std::cos(e) * std::cos(a),
                                                     std::cos(e) * std::sin(a), std::sin(e)};
            pose.look_at = center;
            pose.up = elevation == 90 ? Vec3{1, 0, 0} : Vec3{0, 0, 1};
            pose.elevation_deg = elevation;
            pose.azimuth_deg = az;
            pose.level = level;
            poses.push_back(pose);
        }
    }
    return poses;
}

std::optional<Projected> project(const CameraPose& pose, const Intrinsics& intr, const Vec3& point) {
    const Vec3 forward = (pose.look_at - pose.position).normalized();
    const Vec3 right = forward.cross(pose.up).normalized();
    const Vec3 up_cam = right.cross(forward);

    const Vec3 d = point - pose.position;
    const double depth = d.dot(forward);
    if (depth <= 1e-9) return std::nullopt;

    const double tan_half = std::tan(intr.vertical_fov / 2);
    const double aspect = static_cast<double>(intr.image_width) / intr.image_height;
    const double x_ndc = d.dot(right) / (depth * tan_half * aspect);
    const double y_ndc = d.dot(up_cam) / (depth * tan_half);

    Projected p;
    p.u = (x_ndc + 1.0) / 2.0 * intr.image_width;
    p.v = (1.0 - y_ndc) / 2.0 * intr.image_height;
    p.depth = depth;
    return p;
}

namespace {

Snapshot render_points(const Scene& scene, const std::vector<IndexRange>& ranges,
                       const CameraPose& pose, const Intrinsics& intr, int splat_radius_px) {
    Snapshot snap;
    snap.pose = pose;
    snap.intrinsics = intr;
    snap.pixels = Image(intr.image_width, intr.image_height);
    snap.depth.assign(static_cast<std::size_t>(intr.image_width) * intr.image_height,
                      std::numeric_limits<double>::infinity());
    snap.point_index.assign(snap.depth.size(), -1);

    const int r = splat_radius_px;
    const int r2 = r * r;
    for (const auto& range : ranges) {
        for (std::uint32_t i = range.begin; i < range.end; ++i) {
            const auto proj = project(pose, intr, scene.cloud.positions[i]);
            if (!proj) continue;
            const int cx = static_cast<int>(std::floor(proj->u));
            const int cy = static_cast<int>(std::floor(proj->v));
            if (cx < -r || cx >= intr.image_width + r || cy < -r || cy >= intr.image_height + r) {
                continue;
            }
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (dx * dx + dy * dy > r2) continue;
                    const int px = cx + dx, py = cy + dy;
                    if (px < 0 || px >= intr.image_width || py < 0 || py >= intr.image_height) {
                        continue;
                    }
                    const std::size_t idx = static_cast<std::size_t>(py) * intr.image_width + px;
                    if (proj->depth < snap.depth[idx]) {
                        snap.depth[idx] = proj->depth;
                        snap.pixels.pixels[idx] = scene.cloud.colors[i];
                        snap.point_index[idx] = static_cast<std::int32_t>(i);
                    }
                }
            }
        }
    }
    return snap;
}

}  // namespace

Snapshot render(const Scene& scene, const CameraPose& pose, const Intrinsics& intr,
                int splat_radius_px) {
    if (scene.cloud.positions.empty()) throw ValidationError("cannot render an empty scene");
    std::vector<IndexRange> all = {{0, static_cast<std::uint32_t>(scene.cloud.size())}};
    return render_points(scene, all, pose, intr, splat_radius_px);
}

Snapshot render_object_only(const Scene& scene, const SceneObject& target, const CameraPose& pose,
                            const Intrinsics& intr, int splat_radius_px) {
    Snapshot snap = render_points(scene, target.point_ranges, pose, intr, splat_radius_px);
    snap.target_id = target.id;
    return snap;
}

double StubScorer::score(const Snapshot& snapshot, const std::string& /*label*/) {
    const SceneObject* target = nullptr;
    for (const auto& obj : scene_->objects) {
        if (obj.id == snapshot.target_id) target = &obj;
    }
    if (!target) throw ValidationError("stub scorer: snapshot has no valid target_id");

    const Snapshot mask = render_object_only(*scene_, *target, snapshot.pose, snapshot.intrinsics,
                                             splat_radius_px_);
    // A pixel counts when the visible surface in the full render is the
    // target itself: the target-only pass reproduces the same depth there.
    std::size_t hits = 0;
    for (std::size_t i = 0; i < snapshot.depth.size(); ++i) {
        if (std::isfinite(snapshot.depth[i]) && std::isfinite(mask.depth[i]) &&
            std::abs(snapshot.depth[i] - mask.depth[i]) < 1e-9) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(snapshot.depth.size());
}

std::vector<ScoredSnapshot> select_top_m(std::vector<Snapshot> snapshots, const std::string& label,
                                         ScorerClient& scorer, int m) {
    if (m < 1) throw ValidationError("top-M selection needs M >= 1");
    std::vector<ScoredSnapshot> scored;
    scored.reserve(snapshots.size());
    for (auto& snap : snapshots) {
        double s;
        try {
            s = scorer.score(snap, label);
        } catch (const std::exception& e) {
            throw PipelineError("scorer failed for snapshot elev=" +
                                std::to_string(snap.pose.elevation_deg) + " az=" +
                                std::to_string(snap.pose.azimuth_deg) + ": " + e.what());
        }
        scored.push_back({std::move(snap), s});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const ScoredSnapshot& a, const ScoredSnapshot& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.snapshot.pose.elevation_deg != b.snapshot.pose.elevation_deg) {
            return a.snapshot.pose.elevation_deg < b.snapshot.pose.elevation_deg;
        }
        return a.snapshot.pose.azimuth_deg < b.snapshot.pose.azimuth_deg;
    });
    if (scored.size() > static_cast<std::size_t>(m)) scored.resize(m);
    return scored;
}

}  // namespace scenegraft
