#include "scenegraft/clients.hpp"

#include <httplib.h>

#include <json.hpp>

namespace scenegraft {

namespace {

using nlohmann::json;

// One POST with JSON body; throws ClientError on transport failure, 5xx, or
// malformed reply so with_retries can have another go. 4xx is a caller bug
// and fails immediately.
json post_json(const HttpEndpoint& endpoint, const std::string& path, const json& body) {
    httplib::Client cli(endpoint.url);
    cli.set_connection_timeout(10, 0);
    cli.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (!endpoint.api_key.empty())
        headers.emplace("Authorization", "Bearer " + endpoint.api_key);
    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) throw ClientError(endpoint.url + path + ": " + httplib::to_string(res.error()));
    if (res->status >= 500)
        throw ClientError(endpoint.url + path + ": server error " + std::to_string(res->status));
    if (res->status < 200 || res->status >= 300)
        throw ValidationError(endpoint.url + path + ": status " + std::to_string(res->status) +
                              ": " + res->body);
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded())
        throw ClientError(endpoint.url + path + ": reply is not valid JSON");
    return reply;
}

std::string image_b64(const Image& image) {
    const std::vector<std::uint8_t> png = encode_png(image);
    return base64_encode(png.data(), png.size());
}

}  // namespace

std::string HttpCaptioner::caption(const std::vector<std::string>& turns, const Image& image) {
    const json body = {{"turns", turns}, {"image_png_b64", image_b64(image)}};
    return with_retries<std::string>(retry_, "captioner", [&] {
        json reply = post_json(endpoint_, "/caption", body);
        if (!reply.contains("caption") || !reply["caption"].is_string())
            throw ClientError("captioner reply lacks a caption field");
        std::string text = reply["caption"].get<std::string>();
        if (text.empty()) throw ClientError("captioner returned an empty caption");
        return text;
    });
}

std::string HttpRefiner::refine(const std::vector<std::string>& messages) {
    const json body = {{"messages", messages}};
    return with_retries<std::string>(retry_, "refiner", [&] {
        json reply = post_json(endpoint_, "/refine", body);
        if (!reply.contains("text") || !reply["text"].is_string())
            throw ClientError("refiner reply lacks a text field");
        std::string text = reply["text"].get<std::string>();
        if (text.empty()) throw ClientError("refiner returned an empty reply");
        return text;
    });
}

double HttpScorer::score(const Snapshot& snapshot, const std::string& label) {
    const json body = {{"label", label}, {"image_png_b64", image_b64(snapshot.pixels)}};
    return with_retries<double>(retry_, "scorer", [&] {
        json reply = post_json(endpoint_, "/score", body);
        if (!reply.contains("score") || !reply["score"].is_number())
            throw ClientError("scorer reply lacks a numeric score");
        return reply["score"].get<double>();
    });
}

std::string ScriptedCaptioner::caption(const std::vector<std::string>& turns, const Image&) {
    ++calls;
    seen_turns.push_back(turns);
    if (responses_.empty()) throw ClientError("scripted captioner has no responses");
    const std::size_t i = std::min<std::size_t>(calls - 1, responses_.size() - 1);
    return responses_[i];
}

std::string ScriptedRefiner::refine(const std::vector<std::string>& messages) {
    ++calls;
    seen_messages.push_back(messages);
    if (responses_.empty()) throw ClientError("scripted refiner has no responses");
    const std::size_t i = std::min<std::size_t>(calls - 1, responses_.size() - 1);
    return responses_[i];
}

}  // namespace scenegraft
