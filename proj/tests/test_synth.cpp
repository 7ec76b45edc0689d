#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "ctxguard/synth.hpp"

using namespace ctxguard;

namespace {

std::filesystem::path data_dir() {
    const char* env = std::getenv("CTXGUARD_DATA_DIR");
    REQUIRE(env != nullptr);
    return env;
}

const SeedCorpus& seeds_for(Domain d) {
    static std::map<Domain, SeedCorpus> cache;
    auto it = cache.find(d);
    if (it == cache.end())
        it = cache.emplace(d, load_seed_corpus(data_dir() / "seeds" /
                                               (std::string(to_string(d)) +
                                                ".jsonl")))
                 .first;
    return it->second;
}

const ValidatorRuleSet& rules_for(Domain d) {
    static std::map<Domain, ValidatorRuleSet> cache;
    auto it = cache.find(d);
    if (it == cache.end())
        it = cache.emplace(d, load_rule_set(data_dir() / "rules" /
                                            (std::string(to_string(d)) + ".json")))
                 .first;
    return it->second;
}

// Chat-completions mock whose reply is a pure function of the request body.
class MockGeneratorServer {
  public:
    explicit MockGeneratorServer(std::string canned_answer)
        : canned_(std::move(canned_answer)) {
        server_.Post("/chat/completions", [this](const httplib::Request& req,
                                                 httplib::Response& res) {
            ++requests_;
            const auto body = nlohmann::json::parse(req.body);
            const std::string content =
                canned_ + " [" + std::to_string(body.value("seed", 0ULL)) + "]";
            const nlohmann::json resp{
                {"choices",
                 nlohmann::json::array(
                     {nlohmann::json{{"message", nlohmann::json{
                                                     {"role", "assistant"},
                                                     {"content", content}}}}})}};
            res.set_content(resp.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockGeneratorServer() {
        server_.stop();
        thread_.join();
    }

    std::string base_url() const {
        return "http://127.0.0.1:" + std::to_string(port_);
    }
    int requests() const { return requests_; }

  private:
    std::string canned_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<int> requests_{0};
};

CampaignPlan small_plan(const std::string& base_url, int count,
                        AdversarialMode mode = AdversarialMode::none) {
    CampaignPlan plan;
    CampaignBatch b;
    b.name = "test-batch";
    b.generator = "mock-gen";
    b.base_url = base_url;
    b.domain = Domain::medical;
    b.target_label = Label::unsafe_;
    b.mode = mode;
    b.role = "train";
    b.count = count;
    plan.batches.push_back(b);
    plan.seed = 42;
    return plan;
}

std::filesystem::path temp_journal(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove(p);
    return p;
}

HttpPostPolicy fast_policy() {
    HttpPostPolicy p;
    p.initial_backoff_ms = 1;
    p.timeout_seconds = 5.0;
    return p;
}

constexpr const char* kCleanAnswer =
    "In cases like this one, the usual course is to follow general written "
    "guidance and revisit the plan at the next routine check.";

}  // namespace

TEST_CASE("spec sampling hits the k prior and axis uniformity") {
    const auto& seeds = seeds_for(Domain::medical);
    Rng rng(7);
    const int n = 10000;
    std::map<int, int> k_count;
    std::map<Framing, int> framing_count;
    std::map<Placement, int> placement_count;
    std::map<QiClass, int> qi_count;
    double k_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto spec =
            sample_spec(Domain::medical, AdversarialMode::none, seeds, rng);
        const int k = static_cast<int>(spec.axes.qi_types.size());
        ++k_count[k];
        k_sum += k;
        ++framing_count[spec.axes.framing];
        ++placement_count[spec.axes.placement];
        for (QiClass c : spec.axes.qi_types) ++qi_count[c];
    }
    CHECK(std::abs(k_count[2] / double(n) - 0.45) < 0.02);
    CHECK(std::abs(k_count[3] / double(n) - 0.35) < 0.02);
    CHECK(std::abs(k_count[4] / double(n) - 0.20) < 0.02);
    for (int f = 0; f < kFramingCount; ++f)
        CHECK(std::abs(framing_count[static_cast<Framing>(f)] / double(n) -
                       1.0 / kFramingCount) < 0.05 / kFramingCount * 6);
    for (int p = 0; p < kPlacementCount; ++p)
        CHECK(std::abs(placement_count[static_cast<Placement>(p)] / double(n) -
                       1.0 / kPlacementCount) < 0.05 / kPlacementCount * 4);
    // each QI class appears at least 95% of its expected share
    const double expected_per_class = k_sum / kQiClassCount;
    for (int q = 0; q < kQiClassCount; ++q)
        CHECK(qi_count[static_cast<QiClass>(q)] >= 0.95 * expected_per_class);
}

TEST_CASE("spec sampling is deterministic under a fixed rng seed") {
    const auto& seeds = seeds_for(Domain::law);
    Rng a(123), b(123);
    for (int i = 0; i < 50; ++i) {
        const auto sa = sample_spec(Domain::law, AdversarialMode::indirect_qi,
                                    seeds, a);
        const auto sb = sample_spec(Domain::law, AdversarialMode::indirect_qi,
                                    seeds, b);
        CHECK(sa.axes.qi_types == sb.axes.qi_types);
        CHECK(sa.axes.framing == sb.axes.framing);
        CHECK(sa.axes.placement == sb.axes.placement);
        CHECK(sa.seed_record_id == sb.seed_record_id);
    }
}

TEST_CASE("borderline specs carry a subtype and its template") {
    const auto& seeds = seeds_for(Domain::finance);
    Rng rng(5);
    const auto spec = sample_spec(Domain::finance, AdversarialMode::none, seeds,
                                  rng, Label::borderline_safe);
    REQUIRE(spec.subtype.has_value());
    CHECK(spec.prompt_template_id ==
          std::string("borderline_") + to_string(*spec.subtype));
}

TEST_CASE("prompt rendering fills every slot deterministically") {
    const auto& seeds = seeds_for(Domain::medical);
    const TemplateStore templates(data_dir() / "templates");
    Rng rng(11);
    const auto spec = sample_spec(Domain::medical, AdversarialMode::indirect_qi,
                                  seeds, rng);
    const Record& seed = seeds.records.front();
    const auto& rules = rules_for(Domain::medical);

    const std::string p1 = render_prompt(spec, seed, templates, rules);
    const std::string p2 = render_prompt(spec, seed, templates, rules);
    CHECK(p1 == p2);
    CHECK(p1.find("{{") == std::string::npos);  // no unexpanded slots
    CHECK(p1.find(seed.question) != std::string::npos);
    // indirect_qi prompts spell out the forbidden literal vocabulary
    CHECK(p1.find("year-old") != std::string::npos);
    CHECK(p1.find("must NOT use") != std::string::npos);

    GenerationSpec borderline = spec;
    borderline.target_label = Label::borderline_safe;
    borderline.subtype = BorderlineSubtype::public_guideline_quote;
    borderline.prompt_template_id = "borderline_public_guideline_quote";
    const std::string bp = render_prompt(borderline, seed, templates, rules);
    CHECK(bp.find("publicly available") != std::string::npos);
    CHECK(bp.find("five canonical example") != std::string::npos);

    GenerationSpec missing = spec;
    missing.prompt_template_id = "unsafe_nonexistent";
    CHECK_THROWS_AS(render_prompt(missing, seed, templates, rules), ConfigError);
}

TEST_CASE("plan validation enforces generator disjointness") {
    CampaignPlan plan = small_plan("http://127.0.0.1:1", 1);
    CHECK_NOTHROW(plan.check());

    CampaignPlan dup = plan;
    dup.batches.push_back(dup.batches[0]);
    CHECK_THROWS_AS(dup.check(), ConfigError);

    CampaignPlan heldout = plan;
    CampaignBatch hb = heldout.batches[0];
    hb.name = "heldout-batch";
    hb.role = "heldout";
    heldout.batches.push_back(hb);  // same generator trains and holds out
    CHECK_THROWS_AS(heldout.check(), ConfigError);

    CampaignPlan border = small_plan("http://127.0.0.1:1", 1);
    CampaignBatch aug = border.batches[0];
    aug.name = "aug";
    aug.role = "borderline_aug";
    aug.target_label = Label::borderline_safe;
    CampaignBatch eval = aug;
    eval.name = "eval";
    eval.role = "borderline_eval";
    border.batches = {aug, eval};  // same generator on both borderline sides
    CHECK_THROWS_AS(border.check(), ConfigError);
    border.batches[1].generator = "other-gen";
    CHECK_NOTHROW(border.check());
}

TEST_CASE("clean generator yields 100% with exact counts") {
    MockGeneratorServer srv(kCleanAnswer);
    const auto plan = small_plan(srv.base_url(), 8);
    const std::map<Domain, ValidatorRuleSet> rules{
        {Domain::medical, rules_for(Domain::medical)}};
    const std::map<Domain, SeedCorpus> seeds{
        {Domain::medical, seeds_for(Domain::medical)}};
    const TemplateStore templates(data_dir() / "templates");

    const auto res = run_campaign(plan, rules, seeds, templates,
                                  temp_journal("synth_clean.jsonl"),
                                  fast_policy());
    REQUIRE(res.records.size() == 8);
    const auto& cell = res.ledger.cells.at("mock-gen/none");
    CHECK(cell.attempts == 8);
    CHECK(cell.accepts == 8);
    CHECK(cell.rejects() == 0);
    CHECK(cell.retries_exhausted == 0);
    CHECK(cell.yield() == 1.0);
    for (const auto& r : res.records) {
        CHECK(r.label == Label::unsafe_);
        CHECK(r.generator == "mock-gen");
        REQUIRE(r.axes.has_value());
    }
}

TEST_CASE("ssn-emitting generator accepts nothing and exhausts retries") {
    MockGeneratorServer srv("The SSN on file is 123-45-6789.");
    const auto plan = small_plan(srv.base_url(), 5);  // mode none: budget 2
    const std::map<Domain, ValidatorRuleSet> rules{
        {Domain::medical, rules_for(Domain::medical)}};
    const std::map<Domain, SeedCorpus> seeds{
        {Domain::medical, seeds_for(Domain::medical)}};
    const TemplateStore templates(data_dir() / "templates");

    const auto res = run_campaign(plan, rules, seeds, templates,
                                  temp_journal("synth_ssn.jsonl"),
                                  fast_policy());
    CHECK(res.records.empty());
    const auto& cell = res.ledger.cells.at("mock-gen/none");
    CHECK(cell.accepts == 0);
    CHECK(cell.attempts == 10);  // 5 slots x budget 2
    REQUIRE(cell.rejects_by_rule.size() == 1);
    CHECK(cell.rejects_by_rule.at("ssn") == 10);
    CHECK(cell.retries_exhausted == 5);
    CHECK(cell.attempts == cell.accepts + cell.rejects());
}

TEST_CASE("interrupted campaign resumes to an identical ledger") {
    MockGeneratorServer srv(kCleanAnswer);
    auto plan = small_plan(srv.base_url(), 10);
    plan.seed = 77;
    const std::map<Domain, ValidatorRuleSet> rules{
        {Domain::medical, rules_for(Domain::medical)}};
    const std::map<Domain, SeedCorpus> seeds{
        {Domain::medical, seeds_for(Domain::medical)}};
    const TemplateStore templates(data_dir() / "templates");

    const auto full_journal = temp_journal("synth_full.jsonl");
    const auto full = run_campaign(plan, rules, seeds, templates, full_journal,
                                   fast_policy());

    // simulate an interruption: keep only the first 4 journal lines
    const auto partial_journal = temp_journal("synth_partial.jsonl");
    {
        std::ifstream in(full_journal);
        std::ofstream out(partial_journal);
        std::string line;
        for (int i = 0; i < 4 && std::getline(in, line); ++i) out << line << "\n";
    }
    const int before = srv.requests();
    const auto resumed = run_campaign(plan, rules, seeds, templates,
                                      partial_journal, fast_policy());
    CHECK(srv.requests() - before == 6);  // only the missing attempts ran
    CHECK(resumed.ledger == full.ledger);
    REQUIRE(resumed.records.size() == full.records.size());
    for (std::size_t i = 0; i < full.records.size(); ++i)
        CHECK(serialize_record(resumed.records[i]) ==
              serialize_record(full.records[i]));
}

TEST_CASE("unreachable generator endpoint pauses the campaign") {
    auto plan = small_plan("http://127.0.0.1:1", 2);
    const std::map<Domain, ValidatorRuleSet> rules{
        {Domain::medical, rules_for(Domain::medical)}};
    const std::map<Domain, SeedCorpus> seeds{
        {Domain::medical, seeds_for(Domain::medical)}};
    const TemplateStore templates(data_dir() / "templates");
    HttpPostPolicy policy = fast_policy();
    policy.timeout_seconds = 0.2;
    CHECK_THROWS_AS(run_campaign(plan, rules, seeds, templates,
                                 temp_journal("synth_down.jsonl"), policy),
                    EndpointError);
}

TEST_CASE("empty seed corpus is rejected") {
    const auto p = std::filesystem::temp_directory_path() / "empty_seeds.jsonl";
    std::ofstream(p) << "\n";
    CHECK_THROWS_AS(load_seed_corpus(p), ValidationError);
    std::filesystem::remove(p);
}
