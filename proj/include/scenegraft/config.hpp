#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "scenegraft/captioning.hpp"
#include "scenegraft/insertion.hpp"
#include "scenegraft/lsad.hpp"
#include "scenegraft/rendering.hpp"

namespace scenegraft {

struct PipelineConfig {
    int schema_version = 1;
    std::uint64_t seed = 0;

    std::string scene_dir;        // input scenes; required by augment
    std::string object_bank_dir;  // empty means sample from scene_dir
    std::string out_dir = "out";

    InsertionConfig insertion;
    int insertions_per_scene = 10;

    RenderConfig render;
    int top_m = 3;  // snapshots kept per level

    bool offline = true;
    std::string captioner_url, refiner_url, scorer_url;
    std::string captioner_api_key, refiner_api_key, scorer_api_key;  // env only
    int samples_per_scene_level = 3;  // training-export sampling (n)
    std::string prompt_file;          // empty means shipped defaults
    GlobalPhraseBands phrase_bands;

    DecoderConfig decoder;
};

PipelineConfig default_config();

// Strict parse: unknown keys and out-of-range values are ConfigErrors that
// name the offending key. An empty file yields the defaults. Endpoint URLs
// and API keys are then overridden from CAPTIONER_URL / REFINER_URL /
// SCORER_URL and the matching *_API_KEY variables.
PipelineConfig load_config(const std::filesystem::path& path);

void apply_env_overrides(PipelineConfig& cfg);

// Canonical JSON of everything except credentials; what the hash covers.
std::string config_canonical_json(const PipelineConfig& cfg);

// FNV-1a 64 over the canonical JSON, as 16 hex chars. Recorded in manifests
// so every artifact names the configuration that produced it.
std::string config_hash(const PipelineConfig& cfg);

}  // namespace scenegraft
