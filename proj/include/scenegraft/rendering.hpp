#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scenegraft/image.hpp"
#include "scenegraft/scene.hpp"

namespace scenegraft {

enum class Level { Object, Local, Scene };

const char* level_name(Level level);
Level level_from_name(const std::string& name);

struct CameraPose {
    Vec3 position;
    Vec3 look_at;
    Vec3 up{0, 0, 1};
    int elevation_deg = 0;   // one of 0, 45, 90
    double azimuth_deg = 0;
    Level level = Level::Object;
};

struct Intrinsics {
    int image_width = 512;
    int image_height = 512;
    double vertical_fov = 60.0 * M_PI / 180.0;
};

struct Snapshot {
    Image pixels;
    std::vector<double> depth;       // meters; +inf where no splat landed
    std::vector<std::int32_t> point_index;  // winning point per pixel, -1 if none
    CameraPose pose;
    Intrinsics intrinsics;
    int target_id = -1;

    double depth_at(int x, int y) const {
        return depth[static_cast<std::size_t>(y) * pixels.width + x];
    }
};

struct ScoredSnapshot {
    Snapshot snapshot;
    double score = 0.0;
};

struct RenderConfig {
    Intrinsics intrinsics;
    int splat_radius_px = 2;
    int n_azimuth = 8;
    double fill = 0.9;        // object-level frame fill factor
    double rho_local = 1.5;   // meters added around the target at local level
};

// Multi-angle, per-level camera plan: elevations 0/45/90 deg around the
// target center, n_azimuth headings each, with the 90 deg poses collapsed
// to a single top-down view. Distance frames the level's bounding sphere:
//   object: r_target / fill,  local: r_target + rho_local,  scene: r_scene,
// each divided by tan(vfov/2). r_target is the radius of the target's
// points around its box center.
std::vector<CameraPose> plan_cameras(const Scene& scene, const SceneObject& target,
                                     const AxisBox& scene_box, Level level, int n_azimuth,
                                     const RenderConfig& cfg);

struct Projected {
    double u = 0.0;  // continuous pixel coords: u in [0,W], v in [0,H], v down
    double v = 0.0;
    double depth = 0.0;
};

// Pinhole projection; nothing is returned for points at or behind the
// camera plane.
std::optional<Projected> project(const CameraPose& pose, const Intrinsics& intr, const Vec3& point);

Snapshot render(const Scene& scene, const CameraPose& pose, const Intrinsics& intr,
                int splat_radius_px);

// Render only the target object's points (used for the mask pass).
Snapshot render_object_only(const Scene& scene, const SceneObject& target, const CameraPose& pose,
                            const Intrinsics& intr, int splat_radius_px);

class ScorerClient {
public:
    virtual ~ScorerClient() = default;
    virtual double score(const Snapshot& snapshot, const std::string& label) = 0;
    virtual std::string id() const = 0;
};

// Offline scorer: fraction of frame pixels where the full render's visible
// surface belongs to the target, measured with a target-only mask pass.
class StubScorer : public ScorerClient {
public:
    StubScorer(const Scene& scene, int splat_radius_px)
        : scene_(&scene), splat_radius_px_(splat_radius_px) {}
    double score(const Snapshot& snapshot, const std::string& label) override;
    std::string id() const override { return "stub"; }

private:
    const Scene* scene_;
    int splat_radius_px_;
};

// Top-M by score, ties broken by (elevation, azimuth) ascending. Returns
// everything when fewer than M snapshots exist.
std::vector<ScoredSnapshot> select_top_m(std::vector<Snapshot> snapshots, const std::string& label,
                                         ScorerClient& scorer, int m);

}  // namespace scenegraft
