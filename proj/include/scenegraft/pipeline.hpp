#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "scenegraft/captioning.hpp"
#include "scenegraft/config.hpp"

namespace scenegraft {

struct SceneReport {
    std::string scene_id;
    int insertions_attempted = 0;
    int insertions_succeeded = 0;
    int placement_failures = 0;
    int snapshots = 0;
    int captions_service = 0;
    int captions_template = 0;
    int pairs = 0;
    double seconds = 0.0;
    std::string error;  // nonempty when the whole scene was skipped
};

struct RunReport {
    std::uint64_t seed = 0;
    std::string config_hash;
    double seconds = 0.0;
    std::vector<SceneReport> scenes;

    int total(int SceneReport::* field) const {
        int n = 0;
        for (const auto& s : scenes) n += s.*field;
        return n;
    }
};

// End-to-end augmentation over every scene in cfg.scene_dir: insert, render,
// select, caption, emit. Scene work may run on `jobs` threads; manifests are
// written in scene order afterwards, so output does not depend on the worker
// count. Per-scene failures are recorded and skipped.
RunReport run_augment(const PipelineConfig& cfg, int jobs = 1);

void write_report(const RunReport& report, const std::filesystem::path& path);

// *.ply files with a .json annotation sidecar, sorted by name.
std::vector<std::pair<std::filesystem::path, std::filesystem::path>> find_scenes(
    const std::filesystem::path& dir);

// Renders the camera plan for one target at one level, scores, keeps top_m,
// writes PNGs plus a metadata sidecar under out_dir/snapshots/. Returns the
// saved paths relative to out_dir; top_out (optional) receives the kept
// snapshots for captioning.
std::vector<std::string> render_level_snapshots(const Scene& scene, const SceneObject& target,
                                                Level level, const PipelineConfig& cfg,
                                                ScorerClient& scorer,
                                                const std::filesystem::path& out_dir,
                                                const std::string& stem,
                                                std::vector<ScoredSnapshot>* top_out = nullptr);

}  // namespace scenegraft
