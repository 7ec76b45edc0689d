#pragma once

// Run manifests: every artifact-producing command records what it ran, the
// digests of everything it read and wrote, and when. Chains of commands can
// be audited by matching one step's output digests against the next step's
// input digests.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "ctxguard/common.hpp"
#include "ctxguard/sha256.hpp"

namespace ctxguard {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string file_sha256_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for digest: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    return Sha256::hex(Sha256::hash(bytes));
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct RunManifest {
    std::string command;
    std::string config_hash;  // sha256 of the resolved settings document
    std::map<std::string, std::string> inputs;   // path -> sha256 hex
    std::map<std::string, std::string> outputs;  // path -> sha256 hex
    std::string started_at;
    std::string finished_at;
    std::string tool_version = kToolVersion;

    void add_input(const std::filesystem::path& p) {
        inputs[p.string()] = file_sha256_hex(p);
    }
    void add_output(const std::filesystem::path& p) {
        outputs[p.string()] = file_sha256_hex(p);
    }
    void set_config(const nlohmann::json& resolved_settings) {
        config_hash = Sha256::hex(Sha256::hash(resolved_settings.dump()));
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"command", command},
                              {"config_hash", config_hash},
                              {"inputs", inputs},
                              {"outputs", outputs},
                              {"started_at", started_at},
                              {"finished_at", finished_at},
                              {"tool_version", tool_version}};
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write manifest: " + path.string());
        out << to_json().dump(2) << "\n";
        if (!out) throw IoError("manifest write failed: " + path.string());
    }
};

}  // namespace ctxguard
