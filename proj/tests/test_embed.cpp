#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "ctxguard/embed_client.hpp"

using namespace ctxguard;

namespace {

// In-process OpenAI-compatible /embeddings endpoint. Vectors are a pure
// function of (model, text) so behavior is reproducible across runs.
class MockEncoderServer {
  public:
    explicit MockEncoderServer(std::map<std::string, int> model_dims)
        : model_dims_(std::move(model_dims)) {
        server_.Post("/embeddings", [this](const httplib::Request& req,
                                           httplib::Response& res) {
            ++requests_;
            const auto body = nlohmann::json::parse(req.body);
            const std::string model = body.at("model");
            nlohmann::json data = nlohmann::json::array();
            std::size_t index = 0;
            for (const auto& text : body.at("input")) {
                data.push_back({{"index", index++},
                                {"embedding", vector_for(model, text)}});
            }
            res.set_content(nlohmann::json{{"data", data}}.dump(),
                            "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockEncoderServer() {
        server_.stop();
        thread_.join();
    }

    std::string base_url() const {
        return "http://127.0.0.1:" + std::to_string(port_);
    }
    int requests() const { return requests_; }

    std::vector<double> vector_for(const std::string& model,
                                   const std::string& text) const {
        const auto digest = Sha256::hash(model + "\x1f" + text);
        const int dim = model_dims_.at(model);
        std::vector<double> v(dim);
        for (int i = 0; i < dim; ++i)
            v[i] = (double(digest[i % 32]) - 127.5) / 128.0 + 0.001 * i;
        return v;
    }

  private:
    std::map<std::string, int> model_dims_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<int> requests_{0};
};

Record rec(const std::string& id, const std::string& q, const std::string& a) {
    Record r;
    r.id = id;
    r.domain = Domain::medical;
    r.question = q;
    r.answer = a;
    r.label = Label::safe;
    r.source = "test";
    return r;
}

std::filesystem::path temp_cache(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove(p);
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

HttpPostPolicy fast_policy() {
    HttpPostPolicy p;
    p.initial_backoff_ms = 1;
    p.timeout_seconds = 5.0;
    return p;
}

}  // namespace

TEST_CASE("fused vector concatenates encoder blocks in stack order") {
    MockEncoderServer srv({{"alpha", 3}, {"beta", 2}});
    std::vector<EncoderEndpointConfig> stack{
        {"alpha", srv.base_url(), "alpha", 3},
        {"beta", srv.base_url(), "beta", 2},
    };
    EmbeddingCache cache(temp_cache("embc_order.bin"), stack_fingerprint(stack),
                         5);
    const auto r = rec("a-1", "What?", "That.");
    const auto out = embed_batch({r}, stack, cache, fast_policy());
    REQUIRE(out.size() == 1);
    REQUIRE(out[0].vector.size() == 5);

    const auto a = srv.vector_for("alpha", "What?\nThat.");
    const auto b = srv.vector_for("beta", "What?\nThat.");
    for (int i = 0; i < 3; ++i)
        CHECK(out[0].vector[i] == Catch::Approx(a[i]).epsilon(1e-6));
    for (int i = 0; i < 2; ++i)
        CHECK(out[0].vector[3 + i] == Catch::Approx(b[i]).epsilon(1e-6));

    // permuting the stack permutes the blocks (and the fingerprint)
    std::vector<EncoderEndpointConfig> swapped{stack[1], stack[0]};
    CHECK(stack_fingerprint(swapped) != stack_fingerprint(stack));
    EmbeddingCache cache2(temp_cache("embc_order2.bin"),
                          stack_fingerprint(swapped), 5);
    const auto out2 = embed_batch({r}, swapped, cache2, fast_policy());
    for (int i = 0; i < 2; ++i)
        CHECK(out2[0].vector[i] == Catch::Approx(b[i]).epsilon(1e-6));
    for (int i = 0; i < 3; ++i)
        CHECK(out2[0].vector[2 + i] == Catch::Approx(a[i]).epsilon(1e-6));
}

TEST_CASE("second embedding of the same record is served from cache") {
    MockEncoderServer srv({{"alpha", 4}});
    std::vector<EncoderEndpointConfig> stack{{"alpha", srv.base_url(), "alpha", 4}};
    EmbeddingCache cache(temp_cache("embc_hit.bin"), stack_fingerprint(stack), 4);
    const auto r = rec("a-1", "Q", "A");
    const auto first = embed_batch({r}, stack, cache, fast_policy());
    const int requests_after_first = srv.requests();
    const auto second = embed_batch({r}, stack, cache, fast_policy());
    CHECK(srv.requests() == requests_after_first);  // no network traffic
    CHECK(first[0].vector == second[0].vector);     // byte-identical
}

TEST_CASE("cold runs produce byte-identical cache files") {
    MockEncoderServer srv({{"alpha", 4}, {"beta", 4}});
    std::vector<EncoderEndpointConfig> stack{
        {"alpha", srv.base_url(), "alpha", 4},
        {"beta", srv.base_url(), "beta", 4}};
    const std::vector<Record> rs{rec("a-1", "q1", "a1"), rec("a-2", "q2", "a2"),
                                 rec("a-3", "q3", "a3")};
    const auto p1 = temp_cache("embc_cold1.bin");
    const auto p2 = temp_cache("embc_cold2.bin");
    {
        EmbeddingCache c(p1, stack_fingerprint(stack), 8);
        embed_batch(rs, stack, c, fast_policy());
    }
    {
        EmbeddingCache c(p2, stack_fingerprint(stack), 8);
        embed_batch(rs, stack, c, fast_policy());
    }
    const std::string b1 = slurp(p1), b2 = slurp(p2);
    CHECK(!b1.empty());
    CHECK(b1 == b2);
}

TEST_CASE("cache reload and fingerprint isolation") {
    const auto path = temp_cache("embc_reload.bin");
    Fingerprint fp{};
    fp[0] = 7;
    {
        EmbeddingCache c(path, fp, 3);
        c.append("id-1", {1.0f, 2.0f, 3.0f});
        CHECK(c.lookup("id-1", fp).has_value());
        Fingerprint other = fp;
        other[31] = 9;
        CHECK(!c.lookup("id-1", other).has_value());  // same id, other stack
        CHECK(!c.lookup("missing", fp).has_value());
    }
    EmbeddingCache reloaded(path, fp, 3);
    const auto hit = reloaded.lookup("id-1", fp);
    REQUIRE(hit.has_value());
    CHECK(*hit == std::vector<float>{1.0f, 2.0f, 3.0f});

    // opening the same file under a different stack is a hard error
    Fingerprint other = fp;
    other[0] = 8;
    CHECK_THROWS_AS(EmbeddingCache(path, other, 3), IoError);
}

TEST_CASE("corrupt and truncated caches are reported") {
    const auto path = temp_cache("embc_corrupt.bin");
    std::ofstream(path, std::ios::binary) << "NOPE-this-is-not-a-cache";
    CHECK_THROWS_AS(EmbeddingCache(path, Fingerprint{}, 3), IoError);

    const auto tpath = temp_cache("embc_trunc.bin");
    {
        EmbeddingCache c(tpath, Fingerprint{}, 3);
        c.append("id-1", {1.0f, 2.0f, 3.0f});
    }
    const std::string bytes = slurp(tpath);
    std::ofstream(tpath, std::ios::binary)
        << bytes.substr(0, bytes.size() - 5);  // cut into the last row
    CHECK_THROWS_WITH(EmbeddingCache(tpath, Fingerprint{}, 3),
                      Catch::Matchers::ContainsSubstring("truncated"));
}

TEST_CASE("wrong dimension from an encoder is a hard error naming it") {
    MockEncoderServer srv({{"alpha", 4}});
    std::vector<EncoderEndpointConfig> stack{{"alpha", srv.base_url(), "alpha", 7}};
    EmbeddingCache cache(temp_cache("embc_dim.bin"), stack_fingerprint(stack), 7);
    CHECK_THROWS_WITH(
        embed_batch({rec("a-1", "q", "a")}, stack, cache, fast_policy()),
        Catch::Matchers::ContainsSubstring("alpha") &&
            Catch::Matchers::ContainsSubstring("dimension"));
}

TEST_CASE("unreachable endpoint fails after the retry budget") {
    std::vector<EncoderEndpointConfig> stack{
        {"alpha", "http://127.0.0.1:1", "alpha", 4}};
    stack[0].timeout_seconds = 0.2;
    EmbeddingCache cache(temp_cache("embc_down.bin"), stack_fingerprint(stack), 4);
    CHECK_THROWS_AS(
        embed_batch({rec("a-1", "q", "a")}, stack, cache, fast_policy()),
        EndpointError);
}

TEST_CASE("batch configuration errors") {
    MockEncoderServer srv({{"alpha", 4}});
    std::vector<EncoderEndpointConfig> stack{{"alpha", srv.base_url(), "alpha", 4}};
    EmbeddingCache cache(temp_cache("embc_cfg.bin"), stack_fingerprint(stack), 4);
    CHECK_THROWS_AS(embed_batch({}, stack, cache, fast_policy()), ConfigError);
    CHECK_THROWS_AS(
        embed_batch({rec("a", "q", "a")}, {}, cache, fast_policy()),
        ConfigError);

    // cache built for a different stack is refused up front
    std::vector<EncoderEndpointConfig> other{{"beta", srv.base_url(), "beta", 4}};
    CHECK_THROWS_AS(
        embed_batch({rec("a", "q", "a")}, other, cache, fast_policy()),
        ConfigError);
}
