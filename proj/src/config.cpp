#include "scenegraft/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "scenegraft/errors.hpp"

namespace scenegraft {

namespace {

using json = nlohmann::ordered_json;

void reject_unknown(const json& obj, const std::string& where,
                    const std::set<std::string>& allowed) {
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("unknown config key: " + where + key);
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

void require_range(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError("config value out of range: " + key + " " + what);
}

void parse_insertion(const json& j, PipelineConfig& cfg) {
    reject_unknown(j, "insertion.",
                   {"max_attempts", "cell_size", "margin", "scale_jitter_lo", "scale_jitter_hi",
                    "flip_prob", "delta_floor", "min_floor_inliers", "eps_floor", "z_ceiling",
                    "insertions_per_scene"});
    InsertionConfig& ins = cfg.insertion;
    read_field(j, "max_attempts", ins.max_attempts);
    read_field(j, "cell_size", ins.cell_size);
    read_field(j, "margin", ins.margin);
    read_field(j, "scale_jitter_lo", ins.scale_jitter_lo);
    read_field(j, "scale_jitter_hi", ins.scale_jitter_hi);
    read_field(j, "flip_prob", ins.flip_prob);
    read_field(j, "delta_floor", ins.delta_floor);
    read_field(j, "min_floor_inliers", ins.min_floor_inliers);
    read_field(j, "eps_floor", ins.eps_floor);
    read_field(j, "z_ceiling", ins.z_ceiling);
    read_field(j, "insertions_per_scene", cfg.insertions_per_scene);
}

void parse_rendering(const json& j, PipelineConfig& cfg) {
    reject_unknown(j, "rendering.",
                   {"image_width", "image_height", "fov_deg", "n_azimuth", "fill", "rho_local",
                    "splat_radius_px", "top_m"});
    RenderConfig& r = cfg.render;
    read_field(j, "image_width", r.intrinsics.image_width);
    read_field(j, "image_height", r.intrinsics.image_height);
    if (j.contains("fov_deg"))
        r.intrinsics.vertical_fov = j.at("fov_deg").get<double>() * M_PI / 180.0;
    read_field(j, "n_azimuth", r.n_azimuth);
    read_field(j, "fill", r.fill);
    read_field(j, "rho_local", r.rho_local);
    read_field(j, "splat_radius_px", r.splat_radius_px);
    read_field(j, "top_m", cfg.top_m);
}

void parse_captioning(const json& j, PipelineConfig& cfg) {
    reject_unknown(j, "captioning.",
                   {"offline", "captioner_url", "refiner_url", "scorer_url",
                    "samples_per_scene_level", "prompt_file", "corner_band", "middle_lo",
                    "middle_hi"});
    read_field(j, "offline", cfg.offline);
    read_field(j, "captioner_url", cfg.captioner_url);
    read_field(j, "refiner_url", cfg.refiner_url);
    read_field(j, "scorer_url", cfg.scorer_url);
    read_field(j, "samples_per_scene_level", cfg.samples_per_scene_level);
    read_field(j, "prompt_file", cfg.prompt_file);
    read_field(j, "corner_band", cfg.phrase_bands.corner);
    read_field(j, "middle_lo", cfg.phrase_bands.middle_lo);
    read_field(j, "middle_hi", cfg.phrase_bands.middle_hi);
}

void parse_decoder(const json& j, PipelineConfig& cfg) {
    reject_unknown(j, "decoder.",
                   {"d", "heads", "k_objects", "n_layers", "n_encoder", "n_points", "n_boxes",
                    "h_ffn", "bias_mode", "layer_order"});
    DecoderConfig& d = cfg.decoder;
    read_field(j, "d", d.d);
    read_field(j, "heads", d.heads);
    read_field(j, "k_objects", d.k_objects);
    read_field(j, "n_layers", d.n_layers);
    read_field(j, "n_encoder", d.n_encoder);
    read_field(j, "n_points", d.n_points);
    read_field(j, "n_boxes", d.n_boxes);
    read_field(j, "h_ffn", d.h_ffn);
    if (j.contains("bias_mode")) d.bias_mode = bias_mode_from_name(j.at("bias_mode"));
    if (j.contains("layer_order")) d.layer_order = layer_order_from_name(j.at("layer_order"));
}

void validate(const PipelineConfig& cfg) {
    require_range(cfg.schema_version == 1, "schema_version", "must be 1");
    require_range(cfg.insertion.max_attempts >= 1, "insertion.max_attempts", "must be >= 1");
    require_range(cfg.insertion.cell_size > 0, "insertion.cell_size", "must be > 0");
    require_range(cfg.insertion.margin >= 0, "insertion.margin", "must be >= 0");
    require_range(cfg.insertion.scale_jitter_lo > 0 &&
                      cfg.insertion.scale_jitter_lo <= cfg.insertion.scale_jitter_hi,
                  "insertion.scale_jitter_lo", "must be in (0, scale_jitter_hi]");
    require_range(cfg.insertion.flip_prob >= 0 && cfg.insertion.flip_prob <= 1,
                  "insertion.flip_prob", "must be in [0, 1]");
    require_range(cfg.insertion.eps_floor >= 0, "insertion.eps_floor", "must be >= 0");
    require_range(cfg.insertion.z_ceiling > cfg.insertion.eps_floor, "insertion.z_ceiling",
                  "must exceed eps_floor");
    require_range(cfg.insertions_per_scene >= 1, "insertion.insertions_per_scene", "must be >= 1");
    require_range(cfg.render.intrinsics.image_width >= 16 &&
                      cfg.render.intrinsics.image_height >= 16,
                  "rendering.image_width", "must be >= 16");
    require_range(cfg.render.intrinsics.vertical_fov > 0 &&
                      cfg.render.intrinsics.vertical_fov < M_PI,
                  "rendering.fov_deg", "must be in (0, 180)");
    require_range(cfg.render.n_azimuth >= 1, "rendering.n_azimuth", "must be >= 1");
    require_range(cfg.render.fill > 0 && cfg.render.fill <= 1, "rendering.fill",
                  "must be in (0, 1]");
    require_range(cfg.render.rho_local >= 0, "rendering.rho_local", "must be >= 0");
    require_range(cfg.render.splat_radius_px >= 0, "rendering.splat_radius_px", "must be >= 0");
    require_range(cfg.top_m >= 1, "rendering.top_m", "must be >= 1");
    require_range(cfg.samples_per_scene_level >= 1, "captioning.samples_per_scene_level",
                  "must be >= 1");
    const GlobalPhraseBands& b = cfg.phrase_bands;
    require_range(b.corner > 0 && b.corner < 0.5, "captioning.corner_band", "must be in (0, 0.5)");
    require_range(b.middle_lo < b.middle_hi && b.middle_lo > 0 && b.middle_hi < 1,
                  "captioning.middle_lo", "band must sit inside (0, 1)");
    require_range(cfg.decoder.heads >= 1 && cfg.decoder.d % cfg.decoder.heads == 0, "decoder.d",
                  "must be divisible by decoder.heads");
    require_range(cfg.decoder.n_layers >= 1, "decoder.n_layers", "must be >= 1");
    require_range(cfg.decoder.k_objects >= 1 && cfg.decoder.k_objects <= cfg.decoder.n_points,
                  "decoder.k_objects", "must be in [1, n_points]");

    if (!cfg.prompt_file.empty() && !std::filesystem::exists(cfg.prompt_file))
        throw ConfigError("config references a missing prompt_file: " + cfg.prompt_file);
    if (!cfg.scene_dir.empty() && !std::filesystem::exists(cfg.scene_dir))
        throw ConfigError("config references a missing scene dir: " + cfg.scene_dir);
    if (!cfg.object_bank_dir.empty() && !std::filesystem::exists(cfg.object_bank_dir))
        throw ConfigError("config references a missing object bank dir: " + cfg.object_bank_dir);
}

}  // namespace

PipelineConfig default_config() { return PipelineConfig{}; }

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();

    PipelineConfig cfg;
    const bool blank = text.find_first_not_of(" \t\r\n") == std::string::npos;
    if (!blank) {
        json j = json::parse(text, nullptr, false);
        if (j.is_discarded()) throw ParseError(path.string() + ": config is not valid JSON");
        reject_unknown(j, "",
                       {"schema_version", "seed", "paths", "insertion", "rendering", "captioning",
                        "decoder"});
        read_field(j, "schema_version", cfg.schema_version);
        read_field(j, "seed", cfg.seed);
        if (j.contains("paths")) {
            const json& p = j.at("paths");
            reject_unknown(p, "paths.", {"scenes", "object_bank", "out"});
            read_field(p, "scenes", cfg.scene_dir);
            read_field(p, "object_bank", cfg.object_bank_dir);
            read_field(p, "out", cfg.out_dir);
        }
        if (j.contains("insertion")) parse_insertion(j.at("insertion"), cfg);
        if (j.contains("rendering")) parse_rendering(j.at("rendering"), cfg);
        if (j.contains("captioning")) parse_captioning(j.at("captioning"), cfg);
        if (j.contains("decoder")) parse_decoder(j.at("decoder"), cfg);
    }
    apply_env_overrides(cfg);
    validate(cfg);
    return cfg;
}

void apply_env_overrides(PipelineConfig& cfg) {
    const auto over = [](const char* name, std::string& field) {
        if (const char* v = std::getenv(name); v && *v) field = v;
    };
    over("CAPTIONER_URL", cfg.captioner_url);
    over("REFINER_URL", cfg.refiner_url);
    over("SCORER_URL", cfg.scorer_url);
    over("CAPTIONER_API_KEY", cfg.captioner_api_key);
    over("REFINER_API_KEY", cfg.refiner_api_key);
    over("SCORER_API_KEY", cfg.scorer_api_key);
}

std::string config_canonical_json(const PipelineConfig& cfg) {
    json j;
    j["schema_version"] = cfg.schema_version;
    j["seed"] = cfg.seed;
    // out_dir is where artifacts land, not what they contain; keeping it out
    // of the hash lets runs into different directories compare equal.
    j["paths"] = {{"scenes", cfg.scene_dir}, {"object_bank", cfg.object_bank_dir}};
    const InsertionConfig& ins = cfg.insertion;
    j["insertion"] = {{"max_attempts", ins.max_attempts},
                      {"cell_size", ins.cell_size},
                      {"margin", ins.margin},
                      {"scale_jitter_lo", ins.scale_jitter_lo},
                      {"scale_jitter_hi", ins.scale_jitter_hi},
                      {"flip_prob", ins.flip_prob},
                      {"delta_floor", ins.delta_floor},
                      {"min_floor_inliers", ins.min_floor_inliers},
                      {"eps_floor", ins.eps_floor},
                      {"z_ceiling", ins.z_ceiling},
                      {"insertions_per_scene", cfg.insertions_per_scene}};
    const RenderConfig& r = cfg.render;
    j["rendering"] = {{"image_width", r.intrinsics.image_width},
                      {"image_height", r.intrinsics.image_height},
                      {"fov_deg", r.intrinsics.vertical_fov * 180.0 / M_PI},
                      {"n_azimuth", r.n_azimuth},
                      {"fill", r.fill},
                      {"rho_local", r.rho_local},
                      {"splat_radius_px", r.splat_radius_px},
                      {"top_m", cfg.top_m}};
    j["captioning"] = {{"offline", cfg.offline},
                       {"captioner_url", cfg.captioner_url},
                       {"refiner_url", cfg.refiner_url},
                       {"scorer_url", cfg.scorer_url},
                       {"samples_per_scene_level", cfg.samples_per_scene_level},
                       {"prompt_file", cfg.prompt_file},
                       {"corner_band", cfg.phrase_bands.corner},
                       {"middle_lo", cfg.phrase_bands.middle_lo},
                       {"middle_hi", cfg.phrase_bands.middle_hi}};
    const DecoderConfig& d = cfg.decoder;
    j["decoder"] = {{"d", d.d},
                    {"heads", d.heads},
                    {"k_objects", d.k_objects},
                    {"n_layers", d.n_layers},
                    {"n_encoder", d.n_encoder},
                    {"n_points", d.n_points},
                    {"n_boxes", d.n_boxes},
                    {"h_ffn", d.h_ffn},
                    {"bias_mode", bias_mode_name(d.bias_mode)},
                    {"layer_order", layer_order_name(d.layer_order)}};
    return j.dump();
}

std::string config_hash(const PipelineConfig& cfg) {
    const std::string canon = config_canonical_json(cfg);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace scenegraft
