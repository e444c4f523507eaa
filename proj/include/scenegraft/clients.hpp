#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "scenegraft/errors.hpp"
#include "scenegraft/image.hpp"
#include "scenegraft/rendering.hpp"

namespace scenegraft {

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_delay{200};
    double backoff_factor = 2.0;
    // Injectable for tests; nullptr means std::this_thread::sleep_for.
    std::function<void(std::chrono::milliseconds)> sleeper;
};

// Runs attempt() until it returns or the budget is spent. A retryable
// failure is signalled by throwing ClientError; anything else propagates
// immediately.
template <typename T>
T with_retries(const RetryPolicy& policy, const std::string& what,
               const std::function<T()>& attempt) {
    auto delay = policy.initial_delay;
    std::string last_error = "no attempts made";
    for (int a = 1; a <= policy.max_attempts; ++a) {
        try {
            return attempt();
        } catch (const ClientError& e) {
            last_error = e.what();
        }
        if (a < policy.max_attempts) {
            if (policy.sleeper)
                policy.sleeper(delay);
            else
                std::this_thread::sleep_for(delay);
            delay = std::chrono::milliseconds(
                static_cast<long long>(static_cast<double>(delay.count()) * policy.backoff_factor));
        }
    }
    throw ClientError(what + " failed after " + std::to_string(policy.max_attempts) +
                      " attempts: " + last_error);
}

// Multi-turn image captioner (one conversation per snapshot).
class CaptionerClient {
public:
    virtual ~CaptionerClient() = default;
    virtual std::string caption(const std::vector<std::string>& turns, const Image& image) = 0;
    virtual std::string id() const = 0;
};

// Text-only rectify/summarize/rephrase model.
class RefinerClient {
public:
    virtual ~RefinerClient() = default;
    virtual std::string refine(const std::vector<std::string>& messages) = 0;
    virtual std::string id() const = 0;
};

struct HttpEndpoint {
    std::string url;      // scheme://host[:port]
    std::string api_key;  // empty means no Authorization header
};

// POST /caption {"turns": [...], "image_png_b64": "..."} -> {"caption": "..."}
class HttpCaptioner : public CaptionerClient {
public:
    HttpCaptioner(HttpEndpoint endpoint, RetryPolicy retry = {})
        : endpoint_(std::move(endpoint)), retry_(std::move(retry)) {}
    std::string caption(const std::vector<std::string>& turns, const Image& image) override;
    std::string id() const override { return "http-captioner:" + endpoint_.url; }

private:
    HttpEndpoint endpoint_;
    RetryPolicy retry_;
};

// POST /refine {"messages": [...]} -> {"text": "..."}
class HttpRefiner : public RefinerClient {
public:
    HttpRefiner(HttpEndpoint endpoint, RetryPolicy retry = {})
        : endpoint_(std::move(endpoint)), retry_(std::move(retry)) {}
    std::string refine(const std::vector<std::string>& messages) override;
    std::string id() const override { return "http-refiner:" + endpoint_.url; }

private:
    HttpEndpoint endpoint_;
    RetryPolicy retry_;
};

// POST /score {"label": "...", "image_png_b64": "..."} -> {"score": x}
class HttpScorer : public ScorerClient {
public:
    HttpScorer(HttpEndpoint endpoint, RetryPolicy retry = {})
        : endpoint_(std::move(endpoint)), retry_(std::move(retry)) {}
    double score(const Snapshot& snapshot, const std::string& label) override;
    std::string id() const override { return "http-scorer:" + endpoint_.url; }

private:
    HttpEndpoint endpoint_;
    RetryPolicy retry_;
};

// Canned-response doubles shared by the test suites. Responses are consumed
// front to back; the last one repeats once the queue runs dry.
class ScriptedCaptioner : public CaptionerClient {
public:
    explicit ScriptedCaptioner(std::vector<std::string> responses)
        : responses_(std::move(responses)) {}
    std::string caption(const std::vector<std::string>& turns, const Image& image) override;
    std::string id() const override { return "scripted-captioner"; }

    int calls = 0;
    std::vector<std::vector<std::string>> seen_turns;

private:
    std::vector<std::string> responses_;
};

class ScriptedRefiner : public RefinerClient {
public:
    explicit ScriptedRefiner(std::vector<std::string> responses)
        : responses_(std::move(responses)) {}
    std::string refine(const std::vector<std::string>& messages) override;
    std::string id() const override { return "scripted-refiner"; }

    int calls = 0;
    std::vector<std::vector<std::string>> seen_messages;

private:
    std::vector<std::string> responses_;
};

}  // namespace scenegraft
