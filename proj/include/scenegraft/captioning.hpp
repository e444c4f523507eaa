#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "scenegraft/clients.hpp"
#include "scenegraft/insertion.hpp"
#include "scenegraft/rendering.hpp"
#include "scenegraft/spatial_relations.hpp"

namespace scenegraft {

struct PromptScript {
    Level level = Level::Object;
    std::vector<std::string> turns;  // never empty
};

// Per-level conversation scripts, loadable from an editable file so prompt
// tuning does not need a rebuild. "<class>" in a turn is replaced by the
// target class at build time.
struct PromptLibrary {
    int version = 1;
    std::vector<std::string> object_turns;
    std::vector<std::string> local_turns;
    std::vector<std::string> scene_turns;

    static PromptLibrary defaults();
    static PromptLibrary load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

PromptScript build_prompt(const PromptLibrary& lib, Level level, const std::string& target_class);
PromptScript build_prompt(Level level, const std::string& target_class);  // shipped defaults

struct Caption {
    std::string text;
    Level level = Level::Object;
    std::string source;  // "service" or "template"
    int word_count = 0;
};

Caption make_caption(std::string text, Level level, std::string source);

struct RawCaption {
    std::string text;
    std::string snapshot_id;  // level/elevation/azimuth of the source view
};

// One caption per snapshot, walking the script turns through the client.
// Empty snapshot lists and blank replies are errors.
std::vector<RawCaption> run_captioner(const std::vector<ScoredSnapshot>& snapshots,
                                      const PromptScript& script, CaptionerClient& client);

// Rectify, summarize, rephrase. The result must mention target_class
// (case-insensitive); one corrective re-ask is allowed, after which the
// fallback caption is used. Client failure also lands on the fallback.
Caption refine(const std::vector<RawCaption>& raws, const std::string& target_class,
               RefinerClient& client, Level level, const std::function<Caption()>& fallback);

// Thresholds for the scene-level phrase, on normalized center coordinates.
struct GlobalPhraseBands {
    double corner = 0.2;     // both axes within this of 0 or 1
    double middle_lo = 0.4;  // both axes inside [middle_lo, middle_hi]
    double middle_hi = 0.6;
};

// Which phrase a normalized (x, y) position earns: "in the corner of the
// room", "in the middle of the room", or "near the <side> wall".
std::string global_phrase(double x_norm, double y_norm, const GlobalPhraseBands& bands = {});

// Deterministic offline caption. object: article + optional size adjective;
// local: nearest-neighbor relation phrase; scene: position phrase from the
// normalized coordinates. rng picks the sentence opener only.
Caption template_caption(const InsertionResult& aug, const PairwiseRelations& pairwise,
                         const GlobalRelations& global, Level level, Rng& rng,
                         const GlobalPhraseBands& bands = {});

struct Provenance {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string prompt_version;
    std::string captioner_id;
    std::string refiner_id;
    std::string scorer_id;
};

struct PairRecord {
    std::string scene_id;
    std::string aug_id;
    std::string target_class;
    AxisBox target_box;  // equals InsertionResult.location
    Level level = Level::Object;
    Caption caption;
    std::vector<std::string> snapshot_paths;
    Provenance provenance;
};

class PairSink {
public:
    virtual ~PairSink() = default;
    virtual void append(const PairRecord& record) = 0;
};

// JSON Lines manifest, one record per line.
class JsonlPairSink : public PairSink {
public:
    explicit JsonlPairSink(const std::filesystem::path& path);
    void append(const PairRecord& record) override;

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

std::vector<PairRecord> read_pairs(const std::filesystem::path& path);

// One record per caption, appended to the sink and returned.
std::vector<PairRecord> emit_pairs(const InsertionResult& aug, const std::string& scene_id,
                                   const std::string& aug_id,
                                   const std::vector<Caption>& captions,
                                   const std::map<Level, std::vector<std::string>>& snapshot_paths,
                                   const Provenance& provenance, PairSink& sink);

}  // namespace scenegraft
