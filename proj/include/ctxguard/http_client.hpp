#pragma once

#include <chrono>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ctxguard/common.hpp"

namespace ctxguard {

// One JSON-over-HTTP POST with the shared retry policy: 3 attempts with
// exponential backoff. Used for both endpoint roles (embeddings and
// chat completions) of the OpenAI-compatible serving contract.
struct HttpPostPolicy {
    int attempts = 3;
    int initial_backoff_ms = 100;
    double timeout_seconds = 60.0;
    std::string bearer_token;  // from the environment; never from config files
};

inline nlohmann::json post_json(const std::string& base_url,
                                const std::string& path,
                                const nlohmann::json& body,
                                const HttpPostPolicy& policy = {}) {
    std::string last_error;
    int backoff = policy.initial_backoff_ms;
    for (int attempt = 0; attempt < policy.attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        httplib::Client cli(base_url);
        cli.set_connection_timeout(std::chrono::duration<double>(policy.timeout_seconds));
        cli.set_read_timeout(std::chrono::duration<double>(policy.timeout_seconds));
        if (!policy.bearer_token.empty())
            cli.set_bearer_token_auth(policy.bearer_token);
        const auto res = cli.Post(path, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            last_error = std::string("bad JSON in response: ") + e.what();
        }
    }
    throw EndpointError(base_url + path + ": " + last_error + " after " +
                        std::to_string(policy.attempts) + " attempts");
}

}  // namespace ctxguard
