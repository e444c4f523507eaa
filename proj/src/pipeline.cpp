#include "scenegraft/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <iostream>
#include <memory>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "scenegraft/clients.hpp"
#include "scenegraft/errors.hpp"

namespace scenegraft {

namespace {

using json = nlohmann::ordered_json;

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json pose_to_json(const CameraPose& pose) {
    return json{{"level", level_name(pose.level)},
                {"elevation_deg", pose.elevation_deg},
                {"azimuth_deg", pose.azimuth_deg},
                {"position", {pose.position.x, pose.position.y, pose.position.z}},
                {"look_at", {pose.look_at.x, pose.look_at.y, pose.look_at.z}}};
}

char hex_digit(std::uint64_t v) { return "0123456789abcdef"[v & 15]; }

std::string hex64(std::uint64_t v) {
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = hex_digit(v);
    return s;
}

// Buffers records so manifest writes can happen later, in scene order.
class VectorPairSink : public PairSink {
public:
    void append(const PairRecord& record) override { records.push_back(record); }
    std::vector<PairRecord> records;
};

struct SceneOutput {
    SceneReport report;
    std::vector<PairRecord> pairs;
    std::vector<std::string> insertion_lines;  // insertions.jsonl, already serialized
};

struct SceneTask {
    std::filesystem::path cloud;
    std::filesystem::path annotations;
};

}  // namespace

std::vector<std::pair<std::filesystem::path, std::filesystem::path>> find_scenes(
    const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw PipelineError("scene directory does not exist: " + dir.string());
    std::vector<std::pair<std::filesystem::path, std::filesystem::path>> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".ply") continue;
        std::filesystem::path sidecar = entry.path();
        sidecar.replace_extension(".json");
        if (!std::filesystem::exists(sidecar))
            throw PipelineError("scene has no annotation sidecar: " + entry.path().string());
        out.emplace_back(entry.path(), sidecar);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> render_level_snapshots(const Scene& scene, const SceneObject& target,
                                                Level level, const PipelineConfig& cfg,
                                                ScorerClient& scorer,
                                                const std::filesystem::path& out_dir,
                                                const std::string& stem,
                                                std::vector<ScoredSnapshot>* top_out) {
    const AxisBox scene_box = scene.aabb();
    const std::vector<CameraPose> poses =
        plan_cameras(scene, target, scene_box, level, cfg.render.n_azimuth, cfg.render);
    std::vector<Snapshot> snaps;
    snaps.reserve(poses.size());
    for (const CameraPose& pose : poses) {
        Snapshot s = render(scene, pose, cfg.render.intrinsics, cfg.render.splat_radius_px);
        s.target_id = target.id;
        snaps.push_back(std::move(s));
    }
    std::vector<ScoredSnapshot> top =
        select_top_m(std::move(snaps), target.label, scorer, cfg.top_m);

    std::vector<std::string> rel_paths;
    for (std::size_t rank = 0; rank < top.size(); ++rank) {
        const std::string rel =
            "snapshots/" + stem + "-" + level_name(level) + "-" + std::to_string(rank) + ".png";
        const std::filesystem::path png_path = out_dir / rel;
        write_png(top[rank].snapshot.pixels, png_path);
        json meta{{"image", rel},
                  {"score", top[rank].score},
                  {"scorer", scorer.id()},
                  {"target_id", top[rank].snapshot.target_id},
                  {"pixel_hash", hex64(image_hash(top[rank].snapshot.pixels))},
                  {"pose", pose_to_json(top[rank].snapshot.pose)}};
        std::ofstream meta_out(png_path.string() + ".json");
        meta_out << meta.dump(2) << "\n";
        if (!meta_out) throw IoError("cannot write snapshot metadata for " + rel);
        rel_paths.push_back(rel);
    }
    if (top_out) *top_out = std::move(top);
    return rel_paths;
}

namespace {

constexpr Level kLevels[] = {Level::Object, Level::Local, Level::Scene};

struct Clients {
    std::unique_ptr<CaptionerClient> captioner;
    std::unique_ptr<RefinerClient> refiner;
    std::unique_ptr<ScorerClient> scorer;  // online only; offline builds stubs per insertion
};

Clients make_clients(const PipelineConfig& cfg) {
    Clients c;
    if (cfg.offline) return c;
    if (cfg.captioner_url.empty() || cfg.refiner_url.empty() || cfg.scorer_url.empty())
        throw ConfigError("online mode needs captioner_url, refiner_url and scorer_url");
    c.captioner = std::make_unique<HttpCaptioner>(
        HttpEndpoint{cfg.captioner_url, cfg.captioner_api_key});
    c.refiner = std::make_unique<HttpRefiner>(HttpEndpoint{cfg.refiner_url, cfg.refiner_api_key});
    c.scorer = std::make_unique<HttpScorer>(HttpEndpoint{cfg.scorer_url, cfg.scorer_api_key});
    return c;
}

SceneOutput process_scene(const SceneTask& task, const PipelineConfig& cfg,
                          const std::vector<BankEntry>& bank, const PromptLibrary& prompts,
                          const Clients& clients, const std::string& cfg_hash,
                          const std::filesystem::path& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    SceneOutput out;
    Scene scene = load_scene(task.cloud, task.annotations);
    out.report.scene_id = scene.id;

    const Rng rng_scene = Rng(cfg.seed).child(scene.id);
    for (int k = 0; k < cfg.insertions_per_scene; ++k) {
        ++out.report.insertions_attempted;
        Rng rng_ins = rng_scene.child(static_cast<std::uint64_t>(k));
        const std::string aug_id = scene.id + "-aug" + std::to_string(k);
        int attempts = 0;
        std::optional<InsertionResult> res =
            insert_object(scene, bank, rng_ins, cfg.insertion, &attempts);

        json ins_line{{"schema_version", 1}, {"scene_id", scene.id}, {"aug_id", aug_id},
                      {"attempts", attempts}};
        if (!res) {
            ++out.report.placement_failures;
            ins_line["placed"] = false;
            out.insertion_lines.push_back(ins_line.dump());
            continue;
        }
        ++out.report.insertions_succeeded;
        InsertionResult aug = std::move(*res);
        aug.augmented_scene.id = aug_id;
        save_scene(aug.augmented_scene, out_dir / "scenes");

        ins_line["placed"] = true;
        ins_line["target_class"] = aug.inserted.label;
        ins_line["location"] = {
            {"center", {aug.location.center.x, aug.location.center.y, aug.location.center.z}},
            {"size", {aug.location.size.x, aug.location.size.y, aug.location.size.z}}};
        out.insertion_lines.push_back(ins_line.dump());

        std::vector<Vec3> centers;
        centers.reserve(aug.augmented_scene.objects.size());
        for (const SceneObject& o : aug.augmented_scene.objects) centers.push_back(o.box.center);
        const AxisBox scene_box = aug.augmented_scene.aabb();
        const GlobalRelations r_g = global_relations(centers, scene_box);
        const PairwiseRelations r_p = pairwise_relations(centers);

        StubScorer stub(aug.augmented_scene, cfg.render.splat_radius_px);
        ScorerClient& scorer = clients.scorer ? *clients.scorer : static_cast<ScorerClient&>(stub);

        Provenance prov;
        prov.seed = cfg.seed;
        prov.config_hash = cfg_hash;
        prov.prompt_version = std::to_string(prompts.version);
        prov.captioner_id = clients.captioner ? clients.captioner->id() : "template";
        prov.refiner_id = clients.refiner ? clients.refiner->id() : "template";
        prov.scorer_id = scorer.id();

        std::vector<Caption> captions;
        std::map<Level, std::vector<std::string>> paths_by_level;
        for (Level level : kLevels) {
            std::vector<ScoredSnapshot> top;
            paths_by_level[level] = render_level_snapshots(aug.augmented_scene, aug.inserted,
                                                           level, cfg, scorer, out_dir, aug_id,
                                                           &top);
            out.report.snapshots += static_cast<int>(paths_by_level[level].size());

            Rng rng_cap = rng_ins.child(std::string("caption-") + level_name(level));
            const auto fallback = [&]() {
                return template_caption(aug, r_p, r_g, level, rng_cap, cfg.phrase_bands);
            };
            Caption caption;
            if (clients.captioner && clients.refiner) {
                const PromptScript script = build_prompt(prompts, level, aug.inserted.label);
                try {
                    const std::vector<RawCaption> raws = run_captioner(top, script, *clients.captioner);
                    caption = refine(raws, aug.inserted.label, *clients.refiner, level, fallback);
                } catch (const ClientError& e) {
                    std::cerr << "warning: captioning failed for " << aug_id << " ("
                              << level_name(level) << "): " << e.what() << "\n";
                    caption = fallback();
                }
            } else {
                caption = fallback();
            }
            if (caption.source == "service")
                ++out.report.captions_service;
            else
                ++out.report.captions_template;
            captions.push_back(std::move(caption));
        }

        VectorPairSink sink;
        const std::vector<PairRecord> records =
            emit_pairs(aug, scene.id, aug_id, captions, paths_by_level, prov, sink);
        out.report.pairs += static_cast<int>(records.size());
        out.pairs.insert(out.pairs.end(), records.begin(), records.end());
    }
    out.report.seconds = seconds_since(t0);
    return out;
}

}  // namespace

RunReport run_augment(const PipelineConfig& cfg, int jobs) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.scene_dir.empty()) throw PipelineError("no scene directory configured");

    const std::filesystem::path out_dir = cfg.out_dir;
    std::filesystem::create_directories(out_dir / "scenes");
    std::filesystem::create_directories(out_dir / "snapshots");

    const auto scene_files = find_scenes(cfg.scene_dir);
    if (scene_files.empty()) throw PipelineError("no scenes found in " + cfg.scene_dir);

    const std::filesystem::path bank_dir(cfg.object_bank_dir.empty() ? cfg.scene_dir
                                                                     : cfg.object_bank_dir);
    const auto bank_files = find_scenes(bank_dir);
    std::vector<Scene> bank_scenes;
    bank_scenes.reserve(bank_files.size());
    for (const auto& [cloud, sidecar] : bank_files)
        bank_scenes.push_back(load_scene(cloud, sidecar));
    std::vector<BankEntry> bank;
    for (const Scene& s : bank_scenes)
        for (const SceneObject& o : s.objects) bank.push_back({&s, &o});

    const PromptLibrary prompts =
        cfg.prompt_file.empty() ? PromptLibrary::defaults() : PromptLibrary::load(cfg.prompt_file);
    const Clients clients = make_clients(cfg);
    const std::string cfg_hash = config_hash(cfg);

    std::vector<SceneTask> tasks;
    for (const auto& [cloud, sidecar] : scene_files) tasks.push_back({cloud, sidecar});
    std::vector<SceneOutput> outputs(tasks.size());

    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            try {
                outputs[i] = process_scene(tasks[i], cfg, bank, prompts, clients, cfg_hash,
                                           out_dir);
            } catch (const std::exception& e) {
                outputs[i].report.scene_id = tasks[i].cloud.stem().string();
                outputs[i].report.error = e.what();
                std::cerr << "warning: scene " << tasks[i].cloud << " skipped: " << e.what()
                          << "\n";
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    // Single-writer manifest pass, scene order fixed by the sorted file list.
    JsonlPairSink pair_sink(out_dir / "pairs.jsonl");
    std::ofstream ins_out(out_dir / "insertions.jsonl", std::ios::trunc);
    if (!ins_out) throw IoError("cannot write insertions manifest");
    RunReport report;
    report.seed = cfg.seed;
    report.config_hash = cfg_hash;
    for (SceneOutput& so : outputs) {
        for (const PairRecord& r : so.pairs) pair_sink.append(r);
        for (const std::string& line : so.insertion_lines) ins_out << line << "\n";
        report.scenes.push_back(std::move(so.report));
    }
    ins_out.flush();
    if (!ins_out) throw IoError("write to insertions manifest failed");

    report.seconds = seconds_since(t0);
    write_report(report, out_dir / "report.json");
    return report;
}

void write_report(const RunReport& report, const std::filesystem::path& path) {
    json scenes = json::array();
    for (const SceneReport& s : report.scenes) {
        scenes.push_back({{"scene_id", s.scene_id},
                          {"insertions_attempted", s.insertions_attempted},
                          {"insertions_succeeded", s.insertions_succeeded},
                          {"placement_failures", s.placement_failures},
                          {"snapshots", s.snapshots},
                          {"captions_service", s.captions_service},
                          {"captions_template", s.captions_template},
                          {"pairs", s.pairs},
                          {"seconds", s.seconds},
                          {"error", s.error}});
    }
    json j{{"schema_version", 1},
           {"seed", report.seed},
           {"config_hash", report.config_hash},
           {"seconds", report.seconds},
           {"totals",
            {{"insertions_attempted", report.total(&SceneReport::insertions_attempted)},
             {"insertions_succeeded", report.total(&SceneReport::insertions_succeeded)},
             {"placement_failures", report.total(&SceneReport::placement_failures)},
             {"snapshots", report.total(&SceneReport::snapshots)},
             {"captions_service", report.total(&SceneReport::captions_service)},
             {"captions_template", report.total(&SceneReport::captions_template)},
             {"pairs", report.total(&SceneReport::pairs)}}},
           {"scenes", scenes}};
    std::ofstream out(path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("cannot write run report: " + path.string());
}

}  // namespace scenegraft
