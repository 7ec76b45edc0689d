#pragma once

#include <algorithm>
#include <cmath>

#include "ctxguard/embed.hpp"
#include "ctxguard/http_client.hpp"

namespace ctxguard {

namespace detail {

// One /embeddings call for a batch of texts against one encoder.
inline std::vector<std::vector<float>> fetch_embeddings(
    const EncoderEndpointConfig& enc, const std::vector<std::string>& texts,
    const HttpPostPolicy& policy) {
    const nlohmann::json body{{"model", enc.model_id}, {"input", texts}};
    nlohmann::json resp;
    try {
        resp = post_json(enc.base_url, "/embeddings", body, policy);
    } catch (const EndpointError& e) {
        throw EndpointError("encoder '" + enc.name + "': " + e.what());
    }
    if (!resp.contains("data") || !resp["data"].is_array() ||
        resp["data"].size() != texts.size())
        throw EndpointError("encoder '" + enc.name +
                            "': response row count does not match input");
    std::vector<std::vector<float>> out(texts.size());
    for (std::size_t r = 0; r < resp["data"].size(); ++r) {
        const auto& row = resp["data"][r];
        const std::size_t index =
            row.contains("index") ? row.at("index").get<std::size_t>() : r;
        if (index >= out.size())
            throw EndpointError("encoder '" + enc.name + "': bad row index");
        const auto& emb = row.at("embedding");
        if (static_cast<int>(emb.size()) != enc.expected_dim)
            throw EndpointError("encoder '" + enc.name + "' returned dimension " +
                                std::to_string(emb.size()) + ", expected " +
                                std::to_string(enc.expected_dim));
        auto& vec = out[index];
        vec.reserve(emb.size());
        for (const auto& v : emb) {
            const double x = v.get<double>();
            if (!std::isfinite(x))
                throw EndpointError("encoder '" + enc.name +
                                    "' returned a non-finite component");
            vec.push_back(static_cast<float>(x));
        }
    }
    return out;
}

}  // namespace detail

// Fused embeddings for a batch: cache first, then per-encoder fetches for the
// misses, concatenated in stack order and appended to the cache. Requests are
// issued in deterministic (input) order.
inline std::vector<FusedEmbedding> embed_batch(
    const std::vector<Record>& records,
    const std::vector<EncoderEndpointConfig>& stack, EmbeddingCache& cache,
    const HttpPostPolicy& policy = {}) {
    if (records.empty()) throw ConfigError("embed_batch: no records");
    if (stack.empty()) throw ConfigError("embed_batch: empty encoder stack");
    for (const auto& e : stack) e.check();
    const Fingerprint fp = stack_fingerprint(stack);
    if (fp != cache.fingerprint())
        throw ConfigError("embed_batch: cache belongs to a different stack");
    if (stack_dim(stack) != cache.dim())
        throw ConfigError("embed_batch: cache dim does not match stack");

    std::vector<FusedEmbedding> out(records.size());
    std::vector<std::size_t> miss;
    for (std::size_t i = 0; i < records.size(); ++i) {
        out[i].record_id = records[i].id;
        if (auto hit = cache.lookup(records[i].id, fp)) {
            out[i].vector = std::move(*hit);
        } else {
            miss.push_back(i);
        }
    }

    const int chunk = std::max(1, stack.front().batch_size);
    for (std::size_t lo = 0; lo < miss.size();
         lo += static_cast<std::size_t>(chunk)) {
        const std::size_t hi =
            std::min(miss.size(), lo + static_cast<std::size_t>(chunk));
        std::vector<std::string> texts;
        for (std::size_t t = lo; t < hi; ++t)
            texts.push_back(embedding_text(records[miss[t]]));

        std::vector<std::vector<float>> fused(texts.size());
        for (const auto& enc : stack) {
            HttpPostPolicy p = policy;
            p.timeout_seconds = enc.timeout_seconds;
            const auto block = detail::fetch_embeddings(enc, texts, p);
            for (std::size_t t = 0; t < texts.size(); ++t)
                fused[t].insert(fused[t].end(), block[t].begin(), block[t].end());
        }
        for (std::size_t t = lo; t < hi; ++t) {
            out[miss[t]].vector = std::move(fused[t - lo]);
            cache.append(records[miss[t]].id, out[miss[t]].vector);
        }
    }
    return out;
}

}  // namespace ctxguard
