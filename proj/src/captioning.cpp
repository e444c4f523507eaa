#include "scenegraft/captioning.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "scenegraft/errors.hpp"

namespace scenegraft {

namespace {

using json = nlohmann::ordered_json;

std::string lowercase(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool mentions(const std::string& text, const std::string& cls) {
    return lowercase(text).find(lowercase(cls)) != std::string::npos;
}

int count_words(const std::string& text) {
    std::istringstream in(text);
    std::string w;
    int n = 0;
    while (in >> w) ++n;
    return n;
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

}  // namespace

PromptLibrary PromptLibrary::defaults() {
    PromptLibrary lib;
    lib.version = 1;
    lib.object_turns = {
        "Describe the <class> in the image. Give detailed descriptions of its color, material, "
        "and shape.",
        "Summarize the attributes of the <class> in one sentence.",
    };
    // Local and scene share the identify-then-relate structure on purpose;
    // they differ only in how wide the rendered view is.
    lib.local_turns = {
        "List the objects surrounding the <class> in the image.",
        "Describe how the <class> is positioned relative to each surrounding object.",
    };
    lib.scene_turns = lib.local_turns;
    return lib;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open prompt file: " + path.string());
    PromptLibrary lib;
    lib.object_turns.clear();
    lib.local_turns.clear();
    lib.scene_turns.clear();
    std::vector<std::string>* current = nullptr;
    bool have_version = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!have_version) {
            if (line.rfind("version ", 0) != 0)
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": expected a version header");
            lib.version = std::stoi(line.substr(8));
            have_version = true;
            continue;
        }
        if (line.front() == '[') {
            if (line == "[object]")
                current = &lib.object_turns;
            else if (line == "[local]")
                current = &lib.local_turns;
            else if (line == "[scene]")
                current = &lib.scene_turns;
            else
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": unknown section " + line);
            continue;
        }
        if (!current)
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": turn outside any section");
        current->push_back(line);
    }
    if (lib.object_turns.empty() || lib.local_turns.empty() || lib.scene_turns.empty())
        throw ValidationError(path.string() + ": every level needs at least one turn");
    return lib;
}

void PromptLibrary::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write prompt file: " + path.string());
    out << "# one turn per line; <class> is replaced by the target class\n";
    out << "version " << version << "\n\n[object]\n";
    for (const auto& t : object_turns) out << t << "\n";
    out << "\n[local]\n";
    for (const auto& t : local_turns) out << t << "\n";
    out << "\n[scene]\n";
    for (const auto& t : scene_turns) out << t << "\n";
}

PromptScript build_prompt(const PromptLibrary& lib, Level level, const std::string& target_class) {
    const std::vector<std::string>* turns = nullptr;
    switch (level) {
        case Level::Object: turns = &lib.object_turns; break;
        case Level::Local: turns = &lib.local_turns; break;
        case Level::Scene: turns = &lib.scene_turns; break;
    }
    PromptScript script;
    script.level = level;
    for (const auto& t : *turns) script.turns.push_back(replace_all(t, "<class>", target_class));
    if (script.turns.empty()) throw ValidationError("prompt script has no turns");
    return script;
}

PromptScript build_prompt(Level level, const std::string& target_class) {
    return build_prompt(PromptLibrary::defaults(), level, target_class);
}

Caption make_caption(std::string text, Level level, std::string source) {
    if (text.empty()) throw ValidationError("caption text is empty");
    Caption c;
    c.text = std::move(text);
    c.level = level;
    c.source = std::move(source);
    c.word_count = count_words(c.text);
    return c;
}

std::vector<RawCaption> run_captioner(const std::vector<ScoredSnapshot>& snapshots,
                                      const PromptScript& script, CaptionerClient& client) {
    if (snapshots.empty()) throw ValidationError("run_captioner: no snapshots");
    std::vector<RawCaption> out;
    out.reserve(snapshots.size());
    for (const ScoredSnapshot& s : snapshots) {
        std::ostringstream id;
        id << level_name(s.snapshot.pose.level) << "-e" << s.snapshot.pose.elevation_deg << "-a"
           << s.snapshot.pose.azimuth_deg;
        const std::string raw = client.caption(script.turns, s.snapshot.pixels);
        if (raw.empty()) throw ClientError("captioner returned an empty caption for " + id.str());
        out.push_back({raw, id.str()});
    }
    return out;
}

Caption refine(const std::vector<RawCaption>& raws, const std::string& target_class,
               RefinerClient& client, Level level, const std::function<Caption()>& fallback) {
    if (raws.empty()) throw ValidationError("refine: no raw captions");

    std::ostringstream rectify;
    rectify << "These captions describe the same " << target_class
            << ". Identify and rectify any factual inaccuracies:";
    for (std::size_t i = 0; i < raws.size(); ++i)
        rectify << "\n" << (i + 1) << ". [" << raws[i].snapshot_id << "] " << raws[i].text;

    std::vector<std::string> messages = {
        rectify.str(),
        "Summarize the rectified captions into one referential description of the " +
            target_class + ".",
        "Rephrase the description to increase diversity while preserving its meaning.",
    };

    try {
        std::string text = client.refine(messages);
        if (!text.empty() && mentions(text, target_class))
            return make_caption(text, level, "service");
        // One corrective round, then give up on the service path.
        messages.push_back(text);
        messages.push_back("The description must explicitly mention the " + target_class +
                           ". Rewrite it.");
        text = client.refine(messages);
        if (!text.empty() && mentions(text, target_class))
            return make_caption(text, level, "service");
    } catch (const ClientError& e) {
        std::cerr << "warning: refiner unavailable, using template caption: " << e.what() << "\n";
    }
    return fallback();
}

std::string global_phrase(double x_norm, double y_norm, const GlobalPhraseBands& bands) {
    const auto near_edge = [&](double v) { return v <= bands.corner || v >= 1.0 - bands.corner; };
    if (near_edge(x_norm) && near_edge(y_norm)) return "in the corner of the room";
    const auto mid = [&](double v) { return v >= bands.middle_lo && v <= bands.middle_hi; };
    if (mid(x_norm) && mid(y_norm)) return "in the middle of the room";
    const double d[4] = {x_norm, 1.0 - x_norm, y_norm, 1.0 - y_norm};
    const char* side[4] = {"left", "right", "front", "back"};
    int best = 0;
    for (int i = 1; i < 4; ++i)
        if (d[i] < d[best]) best = i;
    return std::string("near the ") + side[best] + " wall";
}

namespace {

std::string article_for(const std::string& word) {
    if (word.empty()) return "a";
    switch (std::tolower(static_cast<unsigned char>(word[0]))) {
        case 'a': case 'e': case 'i': case 'o': case 'u': return "an";
        default: return "a";
    }
}

std::string size_adjective(const Vec3& size) {
    const double volume = size.x * size.y * size.z;
    if (volume < 0.08) return "small ";
    if (volume > 1.2) return "large ";
    return "";
}

std::string relation_phrase(double distance) {
    if (distance < 1.0) return "next to";
    if (distance < 2.5) return "near";
    return "far from";
}

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

}  // namespace

Caption template_caption(const InsertionResult& aug, const PairwiseRelations& pairwise,
                         const GlobalRelations& global, Level level, Rng& rng,
                         const GlobalPhraseBands& bands) {
    const auto& objects = aug.augmented_scene.objects;
    std::size_t idx = objects.size();
    for (std::size_t i = 0; i < objects.size(); ++i)
        if (objects[i].id == aug.inserted.id) idx = i;
    if (idx == objects.size())
        throw ValidationError("template_caption: inserted object not in augmented scene");
    const std::size_t k = objects.size();
    if (global.values.rows != k || pairwise.values.d0 != k)
        throw ValidationError("template_caption: relations do not cover the scene objects");

    const std::string& cls = aug.inserted.label;
    // One opener draw per caption, whatever the level, so the stream layout
    // stays predictable.
    const bool alt_opener = rng.uniform_index(2) == 1;

    std::string text;
    switch (level) {
        case Level::Object: {
            const std::string adj = size_adjective(aug.inserted.box.size);
            const std::string art = article_for(adj.empty() ? cls : adj);
            text = alt_opener ? "There is " + art + " " + adj + cls + "."
                              : capitalize(art) + " " + adj + cls + ".";
            break;
        }
        case Level::Local: {
            std::size_t nearest = k;
            double best = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                if (j == idx) continue;
                const double dist = pairwise.values(idx, j, 0);
                if (nearest == k || dist < best) {
                    nearest = j;
                    best = dist;
                }
            }
            if (nearest == k) {
                // Single-object scene: no neighbor to relate to.
                const std::string phrase =
                    global_phrase(global.values(idx, 0), global.values(idx, 1), bands);
                text = (alt_opener ? "This " : "The ") + cls + " is " + phrase + ".";
            } else {
                text = (alt_opener ? "This " : "The ") + cls + " is " + relation_phrase(best) +
                       " the " + objects[nearest].label + ".";
            }
            break;
        }
        case Level::Scene: {
            const std::string phrase =
                global_phrase(global.values(idx, 0), global.values(idx, 1), bands);
            text = (alt_opener ? "This " : "The ") + cls + " is " + phrase + ".";
            break;
        }
    }
    return make_caption(std::move(text), level, "template");
}

// ---------------------------------------------------------------------------
// Pair manifest

namespace {

constexpr int kPairSchemaVersion = 1;

json box_to_json(const AxisBox& box) {
    return json{{"center", {box.center.x, box.center.y, box.center.z}},
                {"size", {box.size.x, box.size.y, box.size.z}}};
}

AxisBox box_from_json(const json& j) {
    AxisBox box;
    box.center = {j.at("center").at(0).get<double>(), j.at("center").at(1).get<double>(),
                  j.at("center").at(2).get<double>()};
    box.size = {j.at("size").at(0).get<double>(), j.at("size").at(1).get<double>(),
                j.at("size").at(2).get<double>()};
    return box;
}

json record_to_json(const PairRecord& r) {
    return json{
        {"schema_version", kPairSchemaVersion},
        {"scene_id", r.scene_id},
        {"aug_id", r.aug_id},
        {"target_class", r.target_class},
        {"target_box", box_to_json(r.target_box)},
        {"level", level_name(r.level)},
        {"caption",
         {{"text", r.caption.text},
          {"source", r.caption.source},
          {"word_count", r.caption.word_count}}},
        {"snapshot_paths", r.snapshot_paths},
        {"provenance",
         {{"seed", r.provenance.seed},
          {"config_hash", r.provenance.config_hash},
          {"prompt_version", r.provenance.prompt_version},
          {"captioner", r.provenance.captioner_id},
          {"refiner", r.provenance.refiner_id},
          {"scorer", r.provenance.scorer_id}}},
    };
}

PairRecord record_from_json(const json& j) {
    PairRecord r;
    r.scene_id = j.at("scene_id").get<std::string>();
    r.aug_id = j.at("aug_id").get<std::string>();
    r.target_class = j.at("target_class").get<std::string>();
    r.target_box = box_from_json(j.at("target_box"));
    r.level = level_from_name(j.at("level").get<std::string>());
    const json& c = j.at("caption");
    r.caption.text = c.at("text").get<std::string>();
    r.caption.source = c.at("source").get<std::string>();
    r.caption.word_count = c.at("word_count").get<int>();
    r.caption.level = r.level;
    r.snapshot_paths = j.at("snapshot_paths").get<std::vector<std::string>>();
    const json& p = j.at("provenance");
    r.provenance.seed = p.at("seed").get<std::uint64_t>();
    r.provenance.config_hash = p.at("config_hash").get<std::string>();
    r.provenance.prompt_version = p.at("prompt_version").get<std::string>();
    r.provenance.captioner_id = p.at("captioner").get<std::string>();
    r.provenance.refiner_id = p.at("refiner").get<std::string>();
    r.provenance.scorer_id = p.at("scorer").get<std::string>();
    return r;
}

}  // namespace

JsonlPairSink::JsonlPairSink(const std::filesystem::path& path)
    : out_(path, std::ios::trunc), path_(path) {
    if (!out_) throw IoError("cannot open pair manifest for writing: " + path.string());
}

void JsonlPairSink::append(const PairRecord& record) {
    out_ << record_to_json(record).dump() << "\n";
    out_.flush();
    if (!out_) throw IoError("write to pair manifest failed: " + path_.string());
}

std::vector<PairRecord> read_pairs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open pair manifest: " + path.string());
    std::vector<PairRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad JSON record");
        try {
            out.push_back(record_from_json(j));
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<PairRecord> emit_pairs(const InsertionResult& aug, const std::string& scene_id,
                                   const std::string& aug_id,
                                   const std::vector<Caption>& captions,
                                   const std::map<Level, std::vector<std::string>>& snapshot_paths,
                                   const Provenance& provenance, PairSink& sink) {
    if (captions.empty()) throw ValidationError("emit_pairs: no captions");
    std::vector<PairRecord> records;
    records.reserve(captions.size());
    for (const Caption& caption : captions) {
        PairRecord r;
        r.scene_id = scene_id;
        r.aug_id = aug_id;
        r.target_class = aug.inserted.label;
        r.target_box = aug.location;
        r.level = caption.level;
        r.caption = caption;
        auto it = snapshot_paths.find(caption.level);
        if (it != snapshot_paths.end()) r.snapshot_paths = it->second;
        if (caption.source == "service" && r.snapshot_paths.empty())
            throw ValidationError("emit_pairs: service caption without snapshots");
        r.provenance = provenance;
        sink.append(r);
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace scenegraft
