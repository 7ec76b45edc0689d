// Offline stand-in for the OpenAI-compatible serving endpoints used by the
// embed and gen subcommands. Replies are pure functions of the request body,
// so any pipeline driven against this server is fully reproducible.
//
//   /embeddings       -> one --dim float vector per input, derived from
//                        sha256(model, text)
//   /chat/completions -> a fixed compliant answer suffixed with the request
//                        seed
//
// Intended for tests and smoke runs only.

#include <csignal>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ctxguard/sha256.hpp"

namespace {

std::vector<double> vector_for(const std::string& model, const std::string& text,
                               int dim) {
    const auto digest = ctxguard::Sha256::hash(model + "\x1f" + text);
    std::vector<double> v(dim);
    for (int i = 0; i < dim; ++i)
        v[i] = (double(digest[i % 32]) - 127.5) / 128.0 + 0.001 * i;
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic mock encoder/generator endpoint"};
    std::string port_file;
    int dim = 8;
    std::string answer =
        "In cases like this one, the usual course is to follow general written "
        "guidance and revisit the plan at the next routine check.";
    app.add_option("--port-file", port_file,
                   "file the chosen port number is written to")
        ->required();
    app.add_option("--dim", dim, "embedding dimension served");
    app.add_option("--answer", answer, "canned chat-completion answer");
    CLI11_PARSE(app, argc, argv);

    httplib::Server server;
    server.Post("/embeddings", [&](const httplib::Request& req,
                                   httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        const std::string model = body.at("model");
        nlohmann::json data = nlohmann::json::array();
        std::size_t index = 0;
        for (const auto& text : body.at("input"))
            data.push_back({{"index", index++},
                            {"embedding",
                             vector_for(model, text.get<std::string>(), dim)}});
        res.set_content(nlohmann::json{{"data", data}}.dump(),
                        "application/json");
    });
    server.Post("/chat/completions", [&](const httplib::Request& req,
                                         httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        const std::string content =
            answer + " [" + std::to_string(body.value("seed", 0ULL)) + "]";
        const nlohmann::json resp{
            {"choices",
             nlohmann::json::array(
                 {nlohmann::json{{"message",
                                  nlohmann::json{{"role", "assistant"},
                                                 {"content", content}}}}})}};
        res.set_content(resp.dump(), "application/json");
    });

    const int port = server.bind_to_any_port("127.0.0.1");
    if (port <= 0) {
        std::cerr << "mock endpoint: could not bind a port\n";
        return 2;
    }
    {
        std::ofstream out(port_file);
        out << port << "\n";
        if (!out) {
            std::cerr << "mock endpoint: cannot write " << port_file << "\n";
            return 2;
        }
    }
    std::cerr << "mock endpoint listening on 127.0.0.1:" << port << "\n";
    server.listen_after_bind();
    return 0;
}
