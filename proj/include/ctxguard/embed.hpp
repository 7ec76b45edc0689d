#pragma once

// Embedding gateway: fused representations fetched from OpenAI-compatible
// /embeddings endpoints and memoized in a bit-exact on-disk cache so training
// and evaluation never re-embed.

#include <array>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxguard/record.hpp"
#include "ctxguard/sha256.hpp"

namespace ctxguard {

struct EncoderEndpointConfig {
    std::string name;
    std::string base_url;
    std::string model_id;
    int expected_dim = 1024;
    double timeout_seconds = 60.0;
    int max_in_flight = 4;
    int batch_size = 64;

    void check() const {
        if (name.empty()) throw ConfigError("encoder endpoint needs a name");
        if (expected_dim <= 0)
            throw ConfigError("encoder '" + name + "': expected_dim must be positive");
        if (max_in_flight < 1)
            throw ConfigError("encoder '" + name + "': max_in_flight must be >= 1");
    }
};

using Fingerprint = std::array<std::uint8_t, 32>;

// Hash of the ordered (name, model_id) list: any stack change invalidates
// cached vectors.
inline Fingerprint stack_fingerprint(
    const std::vector<EncoderEndpointConfig>& stack) {
    std::string acc;
    for (const auto& e : stack) {
        acc += e.name;
        acc += '\t';
        acc += e.model_id;
        acc += '\n';
    }
    return Sha256::hash(acc);
}

inline int stack_dim(const std::vector<EncoderEndpointConfig>& stack) {
    int d = 0;
    for (const auto& e : stack) d += e.expected_dim;
    return d;
}

struct FusedEmbedding {
    std::string record_id;
    std::vector<float> vector;
};

// The text handed to every encoder: question and answer joined by a newline.
inline std::string embedding_text(const Record& r) {
    return r.question + "\n" + r.answer;
}

// On-disk vector cache. Layout (all integers little-endian):
//   "EMBC" | version u16 = 1 | fingerprint 32 bytes | dim u32 | count u64
//   then count rows of [id_len u16][id bytes][dim x float32].
// Appends write the row first and update count last, so a reader never sees
// a partially written row counted.
class EmbeddingCache {
  public:
    static constexpr std::uint16_t kVersion = 1;
    static constexpr std::size_t kHeaderSize = 4 + 2 + 32 + 4 + 8;

    EmbeddingCache(const std::filesystem::path& path, const Fingerprint& fp,
                   int dim)
        : path_(path), fingerprint_(fp), dim_(dim) {
        if (dim <= 0) throw ConfigError("embedding cache: dim must be positive");
        if (std::filesystem::exists(path_)) {
            load();
        } else {
            write_header(0);
        }
    }

    int dim() const { return dim_; }
    std::size_t size() const { return rows_.size(); }
    const Fingerprint& fingerprint() const { return fingerprint_; }

    // Present iff the id is cached AND the fingerprint matches this cache's
    // stack; a different stack's fingerprint never yields a vector.
    std::optional<std::vector<float>> lookup(const std::string& record_id,
                                             const Fingerprint& fp) const {
        if (fp != fingerprint_) return std::nullopt;
        const auto it = rows_.find(record_id);
        if (it == rows_.end()) return std::nullopt;
        return it->second;
    }

    void append(const std::string& record_id, const std::vector<float>& vec) {
        if (static_cast<int>(vec.size()) != dim_)
            throw IoError("embedding cache: vector length " +
                          std::to_string(vec.size()) + " != dim " +
                          std::to_string(dim_));
        if (record_id.size() > 0xffff)
            throw IoError("embedding cache: record id too long");
        if (rows_.count(record_id)) return;  // idempotent

        std::fstream out(path_, std::ios::binary | std::ios::in | std::ios::out);
        if (!out) throw IoError("embedding cache: cannot open " + path_.string());
        out.seekp(0, std::ios::end);
        const std::uint16_t len = static_cast<std::uint16_t>(record_id.size());
        put_u16(out, len);
        out.write(record_id.data(), len);
        out.write(reinterpret_cast<const char*>(vec.data()),
                  static_cast<std::streamsize>(vec.size() * sizeof(float)));
        out.flush();
        // count last: the new row becomes visible only now
        put_u64_at(out, 4 + 2 + 32 + 4, rows_.size() + 1);
        out.flush();
        if (!out) throw IoError("embedding cache: write failed");
        rows_.emplace(record_id, vec);
    }

  private:
    static void put_u16(std::ostream& o, std::uint16_t v) {
        const char b[2] = {char(v & 0xff), char(v >> 8)};
        o.write(b, 2);
    }
    static void put_u32(std::ostream& o, std::uint32_t v) {
        char b[4];
        for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xff);
        o.write(b, 4);
    }
    static void put_u64_at(std::ostream& o, std::streamoff off, std::uint64_t v) {
        char b[8];
        for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
        o.seekp(off);
        o.write(b, 8);
    }

    void write_header(std::uint64_t count) {
        std::ofstream out(path_, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("embedding cache: cannot create " + path_.string());
        out.write("EMBC", 4);
        put_u16(out, kVersion);
        out.write(reinterpret_cast<const char*>(fingerprint_.data()), 32);
        put_u32(out, static_cast<std::uint32_t>(dim_));
        char b[8];
        for (int i = 0; i < 8; ++i) b[i] = char((count >> (8 * i)) & 0xff);
        out.write(b, 8);
        if (!out) throw IoError("embedding cache: header write failed");
    }

    void load() {
        std::ifstream in(path_, std::ios::binary);
        if (!in) throw IoError("embedding cache: cannot open " + path_.string());
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        if (bytes.size() < kHeaderSize || bytes.compare(0, 4, "EMBC") != 0)
            throw IoError("embedding cache: corrupt header in " + path_.string());
        std::size_t pos = 4;
        auto u16 = [&] {
            const std::uint16_t v = std::uint16_t(std::uint8_t(bytes[pos])) |
                                    std::uint16_t(std::uint8_t(bytes[pos + 1])) << 8;
            pos += 2;
            return v;
        };
        auto u32 = [&] {
            std::uint32_t v = 0;
            for (int i = 0; i < 4; ++i)
                v |= std::uint32_t(std::uint8_t(bytes[pos + i])) << (8 * i);
            pos += 4;
            return v;
        };
        auto u64 = [&] {
            std::uint64_t v = 0;
            for (int i = 0; i < 8; ++i)
                v |= std::uint64_t(std::uint8_t(bytes[pos + i])) << (8 * i);
            pos += 8;
            return v;
        };
        if (u16() != kVersion)
            throw IoError("embedding cache: unsupported version");
        Fingerprint fp;
        std::memcpy(fp.data(), bytes.data() + pos, 32);
        pos += 32;
        if (fp != fingerprint_)
            throw IoError("embedding cache: fingerprint mismatch in " +
                          path_.string() + " (different encoder stack)");
        const std::uint32_t dim = u32();
        if (static_cast<int>(dim) != dim_)
            throw IoError("embedding cache: dim mismatch");
        const std::uint64_t count = u64();
        for (std::uint64_t r = 0; r < count; ++r) {
            if (pos + 2 > bytes.size())
                throw IoError("embedding cache: truncated row");
            const std::uint16_t len = u16();
            if (pos + len + std::size_t(dim_) * 4 > bytes.size())
                throw IoError("embedding cache: truncated row");
            std::string id = bytes.substr(pos, len);
            pos += len;
            std::vector<float> vec(dim_);
            std::memcpy(vec.data(), bytes.data() + pos, std::size_t(dim_) * 4);
            pos += std::size_t(dim_) * 4;
            rows_.emplace(std::move(id), std::move(vec));
        }
    }

    std::filesystem::path path_;
    Fingerprint fingerprint_;
    int dim_;
    std::map<std::string, std::vector<float>> rows_;
};

}  // namespace ctxguard
