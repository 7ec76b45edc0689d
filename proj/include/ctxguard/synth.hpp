#pragma once

// Axis-stratified generation: sample specs, render prompts, fan out to
// chat-completion endpoints, validate, retry with fresh specs, and account
// for every attempt in a yield ledger. Attempt-level seeds are derived by
// hashing (campaign seed, batch, slot, attempt), so an interrupted run
// resumed from the journal is bit-identical to an uninterrupted one.

#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ctxguard/http_client.hpp"
#include "ctxguard/record.hpp"
#include "ctxguard/sha256.hpp"
#include "ctxguard/validators.hpp"

namespace ctxguard {

struct GenerationSpec {
    std::string id;
    Domain domain = Domain::medical;
    AxisAssignment axes;
    std::string seed_record_id;
    std::string prompt_template_id;
    Label target_label = Label::unsafe_;
    std::optional<BorderlineSubtype> subtype;
};

struct SeedCorpus {
    std::vector<Record> records;
};

inline SeedCorpus load_seed_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("seed corpus: cannot open " + path.string());
    SeedCorpus corpus;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        corpus.records.push_back(parse_record(line));
    }
    if (corpus.records.empty())
        throw ValidationError("seed corpus " + path.string() + " is empty");
    return corpus;
}

// k ~ (0.45, 0.35, 0.20) over {2, 3, 4}; QI classes a uniform k-subset;
// framing/placement uniform; adversarial mode fixed by the batch.
inline GenerationSpec sample_spec(Domain domain, AdversarialMode mode,
                                  const SeedCorpus& seeds, Rng& rng,
                                  Label target_label = Label::unsafe_) {
    if (seeds.records.empty()) throw ValidationError("sample_spec: empty seed corpus");
    GenerationSpec spec;
    spec.domain = domain;
    spec.target_label = target_label;

    const double u = rng.uniform();
    const int k = u < 0.45 ? 2 : (u < 0.80 ? 3 : 4);
    std::vector<int> classes(kQiClassCount);
    std::iota(classes.begin(), classes.end(), 0);
    rng.shuffle(classes);
    for (int i = 0; i < k; ++i)
        spec.axes.qi_types.insert(static_cast<QiClass>(classes[i]));
    spec.axes.framing = static_cast<Framing>(rng.uniform_index(kFramingCount));
    spec.axes.placement = static_cast<Placement>(rng.uniform_index(kPlacementCount));
    spec.axes.adversarial_mode = mode;

    spec.seed_record_id =
        seeds.records[rng.uniform_index(seeds.records.size())].id;
    if (target_label == Label::borderline_safe) {
        spec.subtype = static_cast<BorderlineSubtype>(rng.uniform_index(kSubtypeCount));
        spec.prompt_template_id =
            std::string("borderline_") + to_string(*spec.subtype);
    } else {
        spec.prompt_template_id = std::string("unsafe_") + to_string(mode);
    }
    return spec;
}

// ---- prompt rendering ------------------------------------------------------

class TemplateStore {
  public:
    explicit TemplateStore(std::filesystem::path root) : root_(std::move(root)) {}

    const std::string& get(Domain domain, const std::string& template_id) const {
        const std::string key = std::string(to_string(domain)) + "/" + template_id;
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            const auto path = root_ / to_string(domain) / (template_id + ".txt");
            std::ifstream in(path);
            if (!in)
                throw ConfigError("missing prompt template " + path.string());
            it = cache_
                     .emplace(key, std::string(std::istreambuf_iterator<char>(in),
                                               {}))
                     .first;
        }
        return it->second;
    }

  private:
    std::filesystem::path root_;
    mutable std::map<std::string, std::string> cache_;
};

namespace detail {

inline void replace_all_slots(std::string& text, const std::string& slot,
                              const std::string& value) {
    const std::string needle = "{{" + slot + "}}";
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), value);
        pos += value.size();
    }
}

}  // namespace detail

inline std::string render_prompt(const GenerationSpec& spec,
                                 const Record& seed_record,
                                 const TemplateStore& templates,
                                 const ValidatorRuleSet& rules) {
    std::string text = templates.get(spec.domain, spec.prompt_template_id);

    std::string qi_list;
    for (QiClass c : spec.axes.qi_types) {
        if (!qi_list.empty()) qi_list += ", ";
        qi_list += qi_display_name(spec.domain, c);
    }
    std::string vocab;
    const auto it = rules.forbidden_vocab.find(spec.axes.adversarial_mode);
    if (it != rules.forbidden_vocab.end()) {
        for (const auto& w : it->second) {
            if (!vocab.empty()) vocab += ", ";
            vocab += "\"" + w + "\"";
        }
    }

    detail::replace_all_slots(text, "seed_excerpt",
                              seed_record.question + "\n" + seed_record.answer);
    detail::replace_all_slots(text, "qi_list", qi_list);
    detail::replace_all_slots(text, "framing", to_string(spec.axes.framing));
    detail::replace_all_slots(text, "placement", to_string(spec.axes.placement));
    detail::replace_all_slots(text, "forbidden_vocab", vocab);
    return text;
}

// ---- campaign plan ---------------------------------------------------------

struct CampaignBatch {
    std::string name;        // unique; also names the output batch
    std::string generator;   // model id sent to the endpoint
    std::string base_url;
    Domain domain = Domain::medical;
    Label target_label = Label::unsafe_;
    AdversarialMode mode = AdversarialMode::none;
    std::string role;        // train | heldout | borderline_aug | borderline_eval
    int count = 0;
};

struct CampaignPlan {
    std::vector<CampaignBatch> batches;
    // max attempts per slot, per adversarial mode (the paper's per-mode
    // retry budget): baseline 2, indirect_qi 8, others 4
    std::map<AdversarialMode, int> retry_budget = {
        {AdversarialMode::none, 2},
        {AdversarialMode::indirect_qi, 8},
        {AdversarialMode::distractor_padded, 4},
        {AdversarialMode::style_transfer, 4},
    };
    double temperature = 0.9;
    int max_tokens = 600;
    int max_model_len = 4096;
    std::uint64_t seed = 0;

    void check() const {
        std::set<std::string> names;
        std::set<std::string> train_generators, heldout_generators;
        std::set<std::string> aug_generators, eval_generators;
        for (const auto& b : batches) {
            if (b.count < 0) throw ConfigError("campaign batch count must be >= 0");
            if (!names.insert(b.name).second)
                throw ConfigError("duplicate batch name '" + b.name + "'");
            if (b.role == "train") train_generators.insert(b.generator);
            else if (b.role == "heldout") heldout_generators.insert(b.generator);
            else if (b.role == "borderline_aug") aug_generators.insert(b.generator);
            else if (b.role == "borderline_eval") eval_generators.insert(b.generator);
            else throw ConfigError("unknown batch role '" + b.role + "'");
        }
        for (const auto& g : heldout_generators)
            if (train_generators.count(g) || aug_generators.count(g))
                throw ConfigError("held-out generator '" + g +
                                  "' also feeds a training pool");
        for (const auto& g : eval_generators)
            if (aug_generators.count(g))
                throw ConfigError("borderline-eval generator '" + g +
                                  "' also generates borderline-aug");
        for (const auto& [mode, budget] : retry_budget)
            if (budget < 1) throw ConfigError("retry budget must be >= 1");
    }
};

inline CampaignPlan parse_campaign_plan(const nlohmann::json& j) {
    CampaignPlan plan;
    for (const auto& bj : j.at("batches")) {
        CampaignBatch b;
        b.name = bj.at("name");
        b.generator = bj.at("generator");
        b.base_url = bj.at("base_url");
        b.domain = domain_from_string(bj.at("domain"));
        b.target_label = label_from_string(bj.value("target_label", "unsafe"));
        b.mode = adversarial_mode_from_string(bj.value("mode", "none"));
        b.role = bj.value("role", "train");
        b.count = bj.at("count");
        plan.batches.push_back(std::move(b));
    }
    if (j.contains("retry_budget"))
        for (const auto& [mode, budget] : j.at("retry_budget").items())
            plan.retry_budget[adversarial_mode_from_string(mode)] = budget;
    plan.temperature = j.value("temperature", 0.9);
    plan.max_tokens = j.value("max_tokens", 600);
    plan.max_model_len = j.value("max_model_len", 4096);
    plan.seed = j.value("seed", std::uint64_t(0));
    plan.check();
    return plan;
}

// ---- yield accounting ------------------------------------------------------

struct YieldCell {
    std::int64_t attempts = 0;
    std::int64_t accepts = 0;
    std::map<std::string, std::int64_t> rejects_by_rule;
    std::int64_t retries_exhausted = 0;

    std::int64_t rejects() const {
        std::int64_t r = 0;
        for (const auto& [rule, n] : rejects_by_rule) r += n;
        return r;
    }
    double yield() const {
        return attempts == 0 ? 0.0 : double(accepts) / double(attempts);
    }
};

struct YieldLedger {
    // keyed by "generator/mode"
    std::map<std::string, YieldCell> cells;

    nlohmann::json to_json() const {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [key, c] : cells) {
            out[key] = {{"attempts", c.attempts},
                        {"accepts", c.accepts},
                        {"rejects_by_rule", c.rejects_by_rule},
                        {"retries_exhausted", c.retries_exhausted},
                        {"yield", c.yield()}};
        }
        return out;
    }

    bool operator==(const YieldLedger& o) const {
        return to_json() == o.to_json();
    }
};

struct CampaignResult {
    std::vector<Record> records;
    YieldLedger ledger;
};

// ---- campaign loop ---------------------------------------------------------

namespace detail {

inline std::uint64_t attempt_seed(std::uint64_t campaign_seed,
                                  const std::string& batch, int slot,
                                  int attempt) {
    const auto digest =
        Sha256::hash(std::to_string(campaign_seed) + "|" + batch + "|" +
                     std::to_string(slot) + "|" + std::to_string(attempt));
    std::uint64_t s = 0;
    for (int i = 0; i < 8; ++i) s |= std::uint64_t(digest[i]) << (8 * i);
    return s;
}

struct JournalEntry {
    std::string batch;
    int slot = 0;
    int attempt = 0;
    bool accepted = false;
    std::vector<std::string> rules;
    std::string record_line;  // canonical serialized record when accepted
};

inline std::string journal_key(const std::string& batch, int slot, int attempt) {
    return batch + "\x1f" + std::to_string(slot) + "\x1f" +
           std::to_string(attempt);
}

inline std::map<std::string, JournalEntry> read_journal(
    const std::filesystem::path& path) {
    std::map<std::string, JournalEntry> out;
    std::ifstream in(path);
    if (!in) return out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            // a torn final line from an interrupted run is dropped; every
            // complete line is one whole attempt
            continue;
        }
        JournalEntry e;
        e.batch = j.at("batch");
        e.slot = j.at("slot");
        e.attempt = j.at("attempt");
        e.accepted = j.at("accepted");
        if (j.contains("rules"))
            e.rules = j.at("rules").get<std::vector<std::string>>();
        if (j.contains("record")) e.record_line = j.at("record");
        out[journal_key(e.batch, e.slot, e.attempt)] = std::move(e);
    }
    return out;
}

inline void append_journal(std::ofstream& out, const JournalEntry& e) {
    nlohmann::json j{{"batch", e.batch},
                     {"slot", e.slot},
                     {"attempt", e.attempt},
                     {"accepted", e.accepted}};
    if (!e.rules.empty()) j["rules"] = e.rules;
    if (!e.record_line.empty()) j["record"] = e.record_line;
    out << j.dump() << "\n";
    out.flush();
}

}  // namespace detail

// One generation call against the batch's chat-completions endpoint.
inline std::string generate_answer(const CampaignBatch& batch,
                                   const CampaignPlan& plan,
                                   const std::string& prompt,
                                   std::uint64_t attempt_seed,
                                   const HttpPostPolicy& policy) {
    const nlohmann::json body{
        {"model", batch.generator},
        {"messages",
         nlohmann::json::array(
             {nlohmann::json{{"role", "user"}, {"content", prompt}}})},
        {"temperature", plan.temperature},
        {"max_tokens", plan.max_tokens},
        {"seed", attempt_seed},
    };
    nlohmann::json resp;
    try {
        resp = post_json(batch.base_url, "/chat/completions", body, policy);
    } catch (const EndpointError& e) {
        throw EndpointError("generator '" + batch.generator + "': " + e.what());
    }
    try {
        return resp.at("choices").at(0).at("message").at("content")
            .get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw EndpointError("generator '" + batch.generator +
                            "': malformed chat completion response");
    }
}

// Runs (or resumes) a campaign. Each plan slot is attempted with a fresh spec
// up to the mode's budget; every attempt is journaled before the next begins,
// and journaled attempts are replayed without touching the network.
inline CampaignResult run_campaign(
    const CampaignPlan& plan,
    const std::map<Domain, ValidatorRuleSet>& rule_sets,
    const std::map<Domain, SeedCorpus>& seed_corpora,
    const TemplateStore& templates, const std::filesystem::path& journal_path,
    const HttpPostPolicy& policy = {}) {
    plan.check();
    auto journal = detail::read_journal(journal_path);
    std::ofstream journal_out(journal_path, std::ios::app);
    if (!journal_out)
        throw IoError("campaign journal: cannot open " + journal_path.string());

    CampaignResult result;
    for (const auto& batch : plan.batches) {
        const auto& rules = rule_sets.at(batch.domain);
        const auto& seeds = seed_corpora.at(batch.domain);
        const int budget = plan.retry_budget.at(batch.mode);
        auto& cell =
            result.ledger.cells[batch.generator + "/" + to_string(batch.mode)];

        for (int slot = 0; slot < batch.count; ++slot) {
            bool accepted = false;
            for (int attempt = 0; attempt < budget && !accepted; ++attempt) {
                const auto key = detail::journal_key(batch.name, slot, attempt);
                auto it = journal.find(key);
                detail::JournalEntry entry;
                if (it != journal.end()) {
                    entry = it->second;
                } else {
                    const std::uint64_t aseed =
                        detail::attempt_seed(plan.seed, batch.name, slot, attempt);
                    Rng rng(aseed);
                    const GenerationSpec spec = sample_spec(
                        batch.domain, batch.mode, seeds, rng, batch.target_label);
                    const Record* seed_record = nullptr;
                    for (const auto& s : seeds.records)
                        if (s.id == spec.seed_record_id) seed_record = &s;
                    const std::string prompt =
                        render_prompt(spec, *seed_record, templates, rules);
                    const std::string answer =
                        generate_answer(batch, plan, prompt, aseed, policy);

                    Record r;
                    r.id = batch.name + "-" + std::to_string(slot) + "-" +
                           std::to_string(attempt);
                    r.domain = batch.domain;
                    r.question = seed_record->question;
                    r.answer = answer;
                    r.label = batch.target_label;
                    r.source = batch.name;
                    r.generator = batch.generator;
                    if (batch.target_label == Label::unsafe_) r.axes = spec.axes;
                    r.subtype = spec.subtype;

                    const ValidationVerdict verdict = validate_record(r, rules);
                    entry.batch = batch.name;
                    entry.slot = slot;
                    entry.attempt = attempt;
                    entry.accepted = verdict.accepted;
                    for (const auto& v : verdict.violations)
                        entry.rules.push_back(v.rule_id);
                    if (verdict.accepted) entry.record_line = serialize_record(r);
                    detail::append_journal(journal_out, entry);
                }

                ++cell.attempts;
                if (entry.accepted) {
                    accepted = true;
                    ++cell.accepts;
                    result.records.push_back(parse_record(entry.record_line));
                } else {
                    // one reject per attempt in the histogram; the first
                    // violated rule is the attributed cause
                    ++cell.rejects_by_rule[entry.rules.empty() ? "unknown"
                                                               : entry.rules[0]];
                }
            }
            if (!accepted) ++cell.retries_exhausted;
        }
    }
    return result;
}

}  // namespace ctxguard
