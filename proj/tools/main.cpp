// scenegraft command line: augment | render | caption | pairs | relations | check.

#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scenegraft/captioning.hpp"
#include "scenegraft/config.hpp"
#include "scenegraft/errors.hpp"
#include "scenegraft/insertion.hpp"
#include "scenegraft/lsad.hpp"
#include "scenegraft/pipeline.hpp"
#include "scenegraft/rendering.hpp"
#include "scenegraft/scene.hpp"
#include "scenegraft/spatial_relations.hpp"
#include "scenegraft/tensor.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct CommonOpts {
    std::string config_path;
    std::int64_t seed = -1;  // -1 means keep the config value
    bool offline = false;
    bool online = false;
    std::string scenes;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Config file (TOML-like JSON, see docs)");
    cmd->add_option("--seed", opts.seed, "Master seed override");
    cmd->add_flag("--offline", opts.offline, "Force offline mode (template captions, stub scorer)");
    cmd->add_flag("--online", opts.online, "Force online mode (requires endpoint URLs)");
    cmd->add_option("--scenes", opts.scenes, "Scene directory override");
    cmd->add_option("--out", opts.out, "Output directory override");
}

scenegraft::PipelineConfig resolve_config(const CommonOpts& opts) {
    scenegraft::PipelineConfig cfg = opts.config_path.empty()
                                         ? scenegraft::default_config()
                                         : scenegraft::load_config(opts.config_path);
    if (opts.config_path.empty()) scenegraft::apply_env_overrides(cfg);
    if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
    if (opts.offline) cfg.offline = true;
    if (opts.online) cfg.offline = false;
    if (!opts.scenes.empty()) cfg.scene_dir = opts.scenes;
    if (!opts.out.empty()) cfg.out_dir = opts.out;
    return cfg;
}

scenegraft::Scene load_scene_arg(const std::string& cloud, const std::string& annotations) {
    fs::path cloud_path = cloud;
    fs::path ann_path = annotations.empty() ? fs::path(cloud).replace_extension(".json")
                                            : fs::path(annotations);
    return scenegraft::load_scene(cloud_path, ann_path);
}

const scenegraft::SceneObject& pick_target(const scenegraft::Scene& scene, int id) {
    if (id < 0) {
        if (scene.objects.empty())
            throw scenegraft::ValidationError("scene has no annotated objects");
        return scene.objects.back();
    }
    for (const auto& obj : scene.objects)
        if (obj.id == id) return obj;
    throw scenegraft::ValidationError("no object with id " + std::to_string(id));
}

int cmd_augment(const CommonOpts& opts, int jobs, int insertions, const std::string& bank) {
    scenegraft::PipelineConfig cfg = resolve_config(opts);
    if (insertions > 0) cfg.insertions_per_scene = insertions;
    if (!bank.empty()) cfg.object_bank_dir = bank;

    scenegraft::RunReport report = scenegraft::run_augment(cfg, jobs);
    scenegraft::write_report(report, fs::path(cfg.out_dir) / "report.json");

    int failed_scenes = 0;
    for (const auto& s : report.scenes)
        if (!s.error.empty()) ++failed_scenes;
    std::cout << "scenes: " << report.scenes.size() << " (" << failed_scenes << " failed)\n"
              << "insertions: " << report.total(&scenegraft::SceneReport::insertions_succeeded)
              << "/" << report.total(&scenegraft::SceneReport::insertions_attempted)
              << " accepted\n"
              << "snapshots: " << report.total(&scenegraft::SceneReport::snapshots) << "\n"
              << "pairs: " << report.total(&scenegraft::SceneReport::pairs) << "\n"
              << "config hash: " << report.config_hash << "\n"
              << "wrote " << (fs::path(cfg.out_dir) / "pairs.jsonl").string() << "\n";
    return (!report.scenes.empty() && failed_scenes == static_cast<int>(report.scenes.size())) ? 1
                                                                                              : 0;
}

int cmd_render(const CommonOpts& opts, const std::string& cloud, const std::string& annotations,
               int target_id, const std::string& level_arg) {
    scenegraft::PipelineConfig cfg = resolve_config(opts);
    scenegraft::Scene scene = load_scene_arg(cloud, annotations);
    const scenegraft::SceneObject& target = pick_target(scene, target_id);

    std::vector<scenegraft::Level> levels;
    if (level_arg == "all") {
        levels = {scenegraft::Level::Object, scenegraft::Level::Local, scenegraft::Level::Scene};
    } else {
        levels = {scenegraft::level_from_name(level_arg)};
    }

    fs::path out_dir = cfg.out_dir;
    fs::create_directories(out_dir / "snapshots");
    scenegraft::StubScorer scorer(scene, cfg.render.splat_radius_px);
    int written = 0;
    for (scenegraft::Level level : levels) {
        std::string stem = scene.id + "-obj" + std::to_string(target.id);
        auto paths = scenegraft::render_level_snapshots(scene, target, level, cfg, scorer, out_dir,
                                                        stem);
        for (const auto& p : paths) std::cout << (out_dir / p).string() << "\n";
        written += static_cast<int>(paths.size());
    }
    std::cout << written << " snapshots (top " << cfg.top_m << " of "
              << 2 * cfg.render.n_azimuth + 1 << " poses per level)\n";
    return 0;
}

int cmd_caption(const CommonOpts& opts, const std::string& cloud, const std::string& annotations,
                int target_id, const std::string& level_arg) {
    scenegraft::PipelineConfig cfg = resolve_config(opts);
    scenegraft::Scene scene = load_scene_arg(cloud, annotations);
    const scenegraft::SceneObject& target = pick_target(scene, target_id);

    // Treat the chosen object as the inserted one so the offline captioner
    // can run against an ordinary annotated scene.
    scenegraft::InsertionResult aug;
    aug.augmented_scene = scene;
    aug.inserted = target;
    aug.location = target.box.aabb();

    std::vector<scenegraft::Vec3> centers;
    centers.reserve(scene.objects.size());
    for (const auto& obj : scene.objects) centers.push_back(obj.box.center);
    auto pairwise = scenegraft::pairwise_relations(centers);
    auto global = scenegraft::global_relations(centers, scene.aabb());

    std::vector<scenegraft::Level> levels;
    if (level_arg == "all") {
        levels = {scenegraft::Level::Object, scenegraft::Level::Local, scenegraft::Level::Scene};
    } else {
        levels = {scenegraft::level_from_name(level_arg)};
    }
    for (scenegraft::Level level : levels) {
        scenegraft::Rng rng = scenegraft::Rng(cfg.seed)
                                  .child(scene.id)
                                  .child(std::string("caption-") + scenegraft::level_name(level));
        scenegraft::Caption cap =
            scenegraft::template_caption(aug, pairwise, global, level, rng, cfg.phrase_bands);
        std::cout << scenegraft::level_name(level) << ": " << cap.text << "\n";
    }
    return 0;
}

int cmd_pairs(const std::string& path) {
    std::vector<scenegraft::PairRecord> records = scenegraft::read_pairs(path);
    std::map<std::string, int> by_level, by_source;
    std::map<std::string, int> by_scene;
    long long words = 0;
    for (const auto& r : records) {
        ++by_level[scenegraft::level_name(r.level)];
        ++by_source[r.caption.source];
        ++by_scene[r.scene_id];
        words += r.caption.word_count;
    }
    std::cout << "records: " << records.size() << "\n";
    std::cout << "scenes: " << by_scene.size() << "\n";
    for (const auto& [level, n] : by_level) std::cout << "level " << level << ": " << n << "\n";
    for (const auto& [source, n] : by_source) std::cout << "source " << source << ": " << n << "\n";
    if (!records.empty())
        std::cout << "mean words: " << static_cast<double>(words) / records.size() << "\n";
    return 0;
}

int cmd_relations(const CommonOpts& opts, const std::string& cloud, const std::string& annotations,
                  bool text) {
    scenegraft::PipelineConfig cfg = resolve_config(opts);
    scenegraft::Scene scene = load_scene_arg(cloud, annotations);
    if (scene.objects.empty()) throw scenegraft::ValidationError("scene has no annotated objects");

    std::vector<scenegraft::Vec3> centers;
    centers.reserve(scene.objects.size());
    for (const auto& obj : scene.objects) centers.push_back(obj.box.center);
    auto global = scenegraft::global_relations(centers, scene.aabb());
    auto pairwise = scenegraft::pairwise_relations(centers);

    fs::path out_dir = cfg.out_dir;
    fs::create_directories(out_dir);
    const std::string ext = text ? ".txt" : ".sgtd";
    fs::path rg_path = out_dir / (scene.id + "-r_g" + ext);
    fs::path rp_path = out_dir / (scene.id + "-r_p" + ext);
    if (text) {
        scenegraft::write_tensor_text(global.values, rg_path);
        scenegraft::write_tensor_text(pairwise.values, rp_path);
    } else {
        scenegraft::write_tensor(global.values, rg_path);
        scenegraft::write_tensor(pairwise.values, rp_path);
    }
    std::cout << "objects: " << centers.size() << "\n"
              << "clamped coordinates: " << global.clamped_count << "\n"
              << rg_path.string() << "\n"
              << rp_path.string() << "\n";
    return 0;
}

int cmd_check(std::uint64_t seed, const std::string& report_path) {
    std::vector<scenegraft::CheckResult> results = scenegraft::run_check_suite(seed);
    bool all_pass = true;
    ordered_json checks = ordered_json::array();
    for (const auto& r : results) {
        all_pass = all_pass && r.pass;
        std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  max_err=" << r.max_err
                  << "  (" << r.seconds << "s)\n";
        checks.push_back({{"name", r.name},
                          {"pass", r.pass},
                          {"max_err", r.max_err},
                          {"seconds", r.seconds}});
    }
    if (!report_path.empty()) {
        ordered_json doc;
        doc["seed"] = seed;
        doc["pass"] = all_pass;
        doc["checks"] = checks;
        std::ofstream out(report_path);
        if (!out) throw scenegraft::IoError("cannot write " + report_path);
        out << doc.dump(2) << "\n";
    }
    std::cout << (all_pass ? "all checks passed" : "CHECK FAILURES") << "\n";
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scenegraft: collision-free object insertion, hybrid rendering, and "
                 "text-3D pair generation for indoor point-cloud scenes"};
    app.require_subcommand(1);

    CommonOpts aug_opts;
    int jobs = 1;
    int insertions = 0;
    std::string bank;
    CLI::App* augment = app.add_subcommand("augment", "Run the full augmentation pipeline");
    add_common(augment, aug_opts);
    augment->add_option("--jobs", jobs, "Scene worker threads")->check(CLI::PositiveNumber);
    augment->add_option("--insertions", insertions, "Insertions per scene override");
    augment->add_option("--bank", bank, "Object bank directory override");

    CommonOpts render_opts;
    std::string render_cloud, render_ann, render_level = "all";
    int render_target = -1;
    CLI::App* render = app.add_subcommand("render", "Render scored snapshots for one object");
    add_common(render, render_opts);
    render->add_option("scene", render_cloud, "Scene point cloud (.ply)")->required();
    render->add_option("--annotations", render_ann, "Annotation sidecar (default: scene .json)");
    render->add_option("--target", render_target, "Object id (default: last object)");
    render->add_option("--level", render_level, "object|local|scene|all");

    CommonOpts caption_opts;
    std::string caption_cloud, caption_ann, caption_level = "all";
    int caption_target = -1;
    CLI::App* caption = app.add_subcommand("caption", "Offline template caption for one object");
    add_common(caption, caption_opts);
    caption->add_option("scene", caption_cloud, "Scene point cloud (.ply)")->required();
    caption->add_option("--annotations", caption_ann, "Annotation sidecar (default: scene .json)");
    caption->add_option("--target", caption_target, "Object id (default: last object)");
    caption->add_option("--level", caption_level, "object|local|scene|all");

    std::string pairs_path;
    CLI::App* pairs = app.add_subcommand("pairs", "Validate and summarize a pairs manifest");
    pairs->add_option("manifest", pairs_path, "pairs.jsonl path")->required();

    CommonOpts rel_opts;
    std::string rel_cloud, rel_ann;
    bool rel_text = false;
    CLI::App* relations = app.add_subcommand("relations", "Dump spatial relation tensors");
    add_common(relations, rel_opts);
    relations->add_option("scene", rel_cloud, "Scene point cloud (.ply)")->required();
    relations->add_option("--annotations", rel_ann, "Annotation sidecar (default: scene .json)");
    relations->add_flag("--text", rel_text, "Write text dumps instead of binary");

    std::uint64_t check_seed = 0;
    std::string check_report;
    CLI::App* check = app.add_subcommand("check", "Run the numeric invariant and gradient suite");
    check->add_option("--seed", check_seed, "Suite seed");
    check->add_option("--report", check_report, "Write a JSON report here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (augment->parsed()) return cmd_augment(aug_opts, jobs, insertions, bank);
        if (render->parsed())
            return cmd_render(render_opts, render_cloud, render_ann, render_target, render_level);
        if (caption->parsed())
            return cmd_caption(caption_opts, caption_cloud, caption_ann, caption_target,
                               caption_level);
        if (pairs->parsed()) return cmd_pairs(pairs_path);
        if (relations->parsed()) return cmd_relations(rel_opts, rel_cloud, rel_ann, rel_text);
        if (check->parsed()) return cmd_check(check_seed, check_report);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
