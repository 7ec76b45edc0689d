// ctxguard: contextual-privacy guardrail pipeline.
//
// Subcommands: embed, train, calibrate, score, eval, gen, validate,
// stress-test. Every artifact-producing command writes exactly one run
// manifest with sha256 digests linking its outputs to its inputs.
//
// Exit codes: 0 success, 1 validation/configuration errors, 2 I/O or
// endpoint errors. Diagnostics go to stderr; data to stdout or files.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctxguard/confound.hpp"
#include "ctxguard/detector.hpp"
#include "ctxguard/embed_client.hpp"
#include "ctxguard/evaluation.hpp"
#include "ctxguard/manifest.hpp"
#include "ctxguard/model_io.hpp"
#include "ctxguard/synth.hpp"
#include "ctxguard/train.hpp"
#include "ctxguard/validators.hpp"

namespace fs = std::filesystem;
using namespace ctxguard;

namespace {

HttpPostPolicy endpoint_policy() {
    HttpPostPolicy policy;
    if (const char* token = std::getenv("CTXGUARD_API_KEY"))
        policy.bearer_token = token;
    return policy;
}

std::vector<Record> load_records(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    std::vector<Record> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(parse_record(line));
        } catch (const Error& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": " + e.what());
        }
    }
    if (out.empty()) throw ValidationError("no records in " + path.string());
    return out;
}

// Feature files: one JSON object per line with keys id, vector and an
// optional stratum used for per-subtype / per-generator breakdowns.
struct FeatureSet {
    std::vector<std::string> ids;
    std::vector<std::string> strata;
    MatrixXd x;
};

FeatureSet load_features(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    FeatureSet out;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": " + e.what(),
                             0);
        }
        out.ids.push_back(j.at("id").get<std::string>());
        out.strata.push_back(j.value("stratum", ""));
        rows.push_back(j.at("vector").get<std::vector<double>>());
        if (rows.back().size() != rows.front().size())
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": inconsistent vector length");
    }
    if (rows.empty()) throw ValidationError("no features in " + path.string());
    out.x.resize(static_cast<Eigen::Index>(rows.size()),
                 static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            out.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                rows[i][j];
    return out;
}

std::vector<ScoredItem> score_features(const DetectorProfile& p,
                                       const FeatureSet& f) {
    std::vector<ScoredItem> out;
    out.reserve(f.ids.size());
    for (Eigen::Index i = 0; i < f.x.rows(); ++i) {
        const VectorXd x = f.x.row(i).transpose();
        out.push_back({f.ids[static_cast<std::size_t>(i)],
                       p.safe_model.score(x), p.unsafe_model.score(x),
                       f.strata[static_cast<std::size_t>(i)]});
    }
    return out;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

fs::path manifest_path_for(const fs::path& primary_output) {
    return fs::path(primary_output.string() + ".manifest.json");
}

// ---- embed ----------------------------------------------------------------

struct EmbedArgs {
    std::string input, stack, cache, out;
};

std::vector<EncoderEndpointConfig> load_stack(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    std::vector<EncoderEndpointConfig> stack;
    for (const auto& ej : j.at("encoders")) {
        EncoderEndpointConfig e;
        e.name = ej.at("name");
        e.base_url = ej.at("base_url");
        e.model_id = ej.at("model");
        e.expected_dim = ej.at("dim");
        e.timeout_seconds = ej.value("timeout_seconds", 60.0);
        e.max_in_flight = ej.value("max_in_flight", 4);
        e.batch_size = ej.value("batch_size", 64);
        e.check();
        stack.push_back(std::move(e));
    }
    if (stack.empty()) throw ConfigError(path.string() + ": empty encoder stack");
    return stack;
}

int run_embed(const EmbedArgs& a) {
    RunManifest manifest;
    manifest.command = "embed";
    manifest.started_at = utc_timestamp();

    const auto stack = load_stack(a.stack);
    const auto records = load_records(a.input);
    EmbeddingCache cache(a.cache, stack_fingerprint(stack), stack_dim(stack));
    const auto fused = embed_batch(records, stack, cache, endpoint_policy());

    auto out = open_output(a.out);
    for (const auto& f : fused) {
        nlohmann::json j{{"id", f.record_id}, {"vector", f.vector}};
        out << j.dump() << "\n";
    }
    out.close();
    std::cerr << "embedded " << fused.size() << " records (dim "
              << stack_dim(stack) << ") -> " << a.out << "\n";

    manifest.set_config(nlohmann::json{{"stack", a.stack}, {"cache", a.cache}});
    manifest.add_input(a.input);
    manifest.add_input(a.stack);
    manifest.add_output(a.out);
    manifest.add_output(a.cache);
    manifest.finished_at = utc_timestamp();
    manifest.write(manifest_path_for(a.out));
    return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
    std::string features, estimator = "gmm", out;
    TrainConfig cfg;
};

int run_train(const TrainArgs& a) {
    RunManifest manifest;
    manifest.command = "train";
    manifest.started_at = utc_timestamp();

    const ScoreKind kind = score_kind_from_string(a.estimator);
    const FeatureSet f = load_features(a.features);
    const DensityModel model = train_density_model(f.x, kind, a.cfg);
    save_model(model, a.out);
    std::cerr << "trained " << a.estimator << " on " << f.x.rows() << " x "
              << f.x.cols() << " -> " << a.out << "\n";

    manifest.set_config(nlohmann::json{{"estimator", a.estimator},
                                       {"pca_dim", a.cfg.pca_dim},
                                       {"gmm_components", a.cfg.gmm_components},
                                       {"nu_candidates", a.cfg.nu_candidates},
                                       {"nu_sweep_folds", a.cfg.nu_sweep_folds},
                                       {"seed", a.cfg.seed}});
    manifest.add_input(a.features);
    manifest.add_output(a.out);
    manifest.finished_at = utc_timestamp();
    manifest.write(manifest_path_for(a.out));
    return 0;
}

// ---- calibrate ------------------------------------------------------------

struct CalibrateArgs {
    std::string safe_model, unsafe_model, safe_holdout, unsafe_holdout;
    std::string variant = "v3", mode = "conservative", pos, out;
    double percentile = 5.0;
};

int run_calibrate(const CalibrateArgs& a) {
    RunManifest manifest;
    manifest.command = "calibrate";
    manifest.started_at = utc_timestamp();

    DetectorProfile p;
    p.safe_model = load_model(a.safe_model);
    p.unsafe_model = load_model(a.unsafe_model);
    p.estimator = p.safe_model.kind();
    p.variant = safe_variant_from_string(a.variant);
    p.check();

    const FeatureSet safe_ho = load_features(a.safe_holdout);
    const FeatureSet unsafe_ho = load_features(a.unsafe_holdout);
    std::vector<double> sigma_s, sigma_u;
    for (Eigen::Index i = 0; i < safe_ho.x.rows(); ++i)
        sigma_s.push_back(p.safe_model.score(safe_ho.x.row(i).transpose()));
    for (Eigen::Index i = 0; i < unsafe_ho.x.rows(); ++i)
        sigma_u.push_back(p.unsafe_model.score(unsafe_ho.x.row(i).transpose()));
    std::tie(p.theta_s, p.theta_u) =
        calibrate_abstain(sigma_s, sigma_u, a.percentile);

    const OperatingMode mode = operating_mode_from_string(a.mode);
    if (mode == OperatingMode::conservative) {
        p.tau = 0.0;
    } else {
        if (a.pos.empty())
            throw ConfigError("calibrate: --pos features are required for mode " +
                              a.mode);
        const FeatureSet pos = load_features(a.pos);
        std::vector<double> deltas;
        for (Eigen::Index i = 0; i < pos.x.rows(); ++i) {
            const VectorXd x = pos.x.row(i).transpose();
            deltas.push_back(p.unsafe_model.score(x) - p.safe_model.score(x));
        }
        p.tau = select_operating_point(mode, deltas);
    }
    p.provenance = {a.safe_holdout, a.unsafe_holdout, a.percentile};
    save_profile(p, a.out);
    std::cerr << "calibrated " << p.config_tag() << ": tau=" << p.tau
              << " theta_s=" << p.theta_s << " theta_u=" << p.theta_u << " -> "
              << a.out << "\n";

    manifest.set_config(nlohmann::json{{"variant", a.variant},
                                       {"mode", a.mode},
                                       {"percentile", a.percentile}});
    manifest.add_input(a.safe_model);
    manifest.add_input(a.unsafe_model);
    manifest.add_input(a.safe_holdout);
    manifest.add_input(a.unsafe_holdout);
    if (!a.pos.empty()) manifest.add_input(a.pos);
    manifest.add_output(a.out);
    manifest.finished_at = utc_timestamp();
    manifest.write(manifest_path_for(a.out));
    return 0;
}

// ---- score ----------------------------------------------------------------

struct ScoreArgs {
    std::string profile, features, out = "-";
};

int run_score(const ScoreArgs& a) {
    const DetectorProfile p = load_profile(a.profile);
    const FeatureSet f = load_features(a.features);
    if (f.x.cols() != p.safe_model.input_dim())
        throw ValidationError("score: feature dim " + std::to_string(f.x.cols()) +
                              " does not match profile input dim " +
                              std::to_string(p.safe_model.input_dim()));

    std::ofstream file;
    const bool to_file = a.out != "-";
    if (to_file) file = open_output(a.out);
    std::ostream& out = to_file ? file : std::cout;
    for (Eigen::Index i = 0; i < f.x.rows(); ++i) {
        const Decision d = decide(p, f.x.row(i).transpose());
        nlohmann::json j{{"id", f.ids[static_cast<std::size_t>(i)]},
                         {"outcome", to_string(d.outcome)},
                         {"delta", d.delta},
                         {"sigma_s", d.sigma_s},
                         {"sigma_u", d.sigma_u}};
        out << j.dump() << "\n";
    }
    if (to_file) {
        file.close();
        RunManifest manifest;
        manifest.command = "score";
        manifest.started_at = manifest.finished_at = utc_timestamp();
        manifest.set_config(nlohmann::json{{"profile", a.profile}});
        manifest.add_input(a.profile);
        manifest.add_input(a.features);
        manifest.add_output(a.out);
        manifest.write(manifest_path_for(a.out));
    }
    return 0;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
    std::string profile, pairing = "within_distribution", pos, neg, out;
    bool grid = false;
};

int run_eval(const EvalArgs& a) {
    RunManifest manifest;
    manifest.command = "eval";
    manifest.started_at = utc_timestamp();

    const DetectorProfile p = load_profile(a.profile);
    const PairingName pairing = pairing_from_string(a.pairing);
    const auto pos = score_features(p, load_features(a.pos));
    const auto neg = score_features(p, load_features(a.neg));
    EvaluationReport rep = evaluate(p, pairing, pos, neg);
    if (a.grid) {
        // per-generator TPR over positives for the cross-generator pairing,
        // per-subtype FPR over negatives otherwise (both full-population)
        rep.strata = stratify(
            pairing == PairingName::cross_generator ? pos : neg, p.tau);
    }

    nlohmann::json report = rep.to_json();
    report["tau"] = p.tau;
    report["theta_s"] = std::isfinite(p.theta_s) ? nlohmann::json(p.theta_s)
                                                 : nlohmann::json(nullptr);
    report["theta_u"] = std::isfinite(p.theta_u) ? nlohmann::json(p.theta_u)
                                                 : nlohmann::json(nullptr);
    auto out = open_output(a.out);
    out << report.dump(2) << "\n";
    out.close();

    std::cout << "config      pairing              auroc   fpr95   fpr90   "
                 "tpr@tau fpr@tau abstain+/-\n";
    char line[256];
    std::snprintf(line, sizeof(line),
                  "%-11s %-20s %.4f  %.4f  %.4f  %.4f  %.4f  %.3f/%.3f\n",
                  rep.config_tag.c_str(), to_string(rep.pairing),
                  rep.auroc_value, rep.fpr95, rep.fpr90, rep.tpr_at_tau,
                  rep.fpr_at_tau, rep.abstain_rate_pos(),
                  rep.abstain_rate_neg());
    std::cout << line;
    for (const auto& [key, row] : rep.strata) {
        if (std::isnan(row.rate))
            std::cout << "  " << key << ": n=" << row.n << " (too small)\n";
        else
            std::cout << "  " << key << ": n=" << row.n << " rate=" << row.rate
                      << "\n";
    }

    manifest.set_config(nlohmann::json{{"pairing", a.pairing}, {"grid", a.grid}});
    manifest.add_input(a.profile);
    manifest.add_input(a.pos);
    manifest.add_input(a.neg);
    manifest.add_output(a.out);
    manifest.finished_at = utc_timestamp();
    manifest.write(manifest_path_for(a.out));
    return 0;
}

// ---- gen ------------------------------------------------------------------

struct GenArgs {
    std::string plan, out_dir, data_dir;
    bool resume = false;
};

int run_gen(const GenArgs& a) {
    RunManifest manifest;
    manifest.command = "gen";
    manifest.started_at = utc_timestamp();

    std::ifstream plan_in(a.plan);
    if (!plan_in) throw IoError("cannot open: " + a.plan);
    nlohmann::json plan_json;
    try {
        plan_json = nlohmann::json::parse(plan_in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(a.plan + ": " + e.what());
    }
    const CampaignPlan plan = parse_campaign_plan(plan_json);

    fs::path data_dir = a.data_dir;
    if (data_dir.empty()) {
        if (const char* env = std::getenv("CTXGUARD_DATA_DIR")) data_dir = env;
        else data_dir = "data";
    }

    std::map<Domain, ValidatorRuleSet> rule_sets;
    std::map<Domain, SeedCorpus> seed_corpora;
    std::set<fs::path> data_inputs;
    for (const auto& b : plan.batches) {
        if (rule_sets.count(b.domain)) continue;
        const fs::path rules_path =
            data_dir / "rules" / (std::string(to_string(b.domain)) + ".json");
        const fs::path seeds_path =
            data_dir / "seeds" / (std::string(to_string(b.domain)) + ".jsonl");
        rule_sets.emplace(b.domain, load_rule_set(rules_path));
        seed_corpora.emplace(b.domain, load_seed_corpus(seeds_path));
        data_inputs.insert(rules_path);
        data_inputs.insert(seeds_path);
    }
    const TemplateStore templates(data_dir / "templates");

    fs::create_directories(a.out_dir);
    const fs::path journal = fs::path(a.out_dir) / "journal.jsonl";
    if (fs::exists(journal) && !a.resume)
        throw ConfigError("gen: journal " + journal.string() +
                          " already exists; pass --resume to continue it");

    const CampaignResult result = run_campaign(
        plan, rule_sets, seed_corpora, templates, journal, endpoint_policy());

    // one record file per batch, in plan order
    std::map<std::string, std::vector<const Record*>> by_batch;
    for (const auto& b : plan.batches) by_batch[b.name];
    for (const auto& r : result.records) by_batch.at(r.source).push_back(&r);
    std::vector<fs::path> record_files;
    for (const auto& b : plan.batches) {
        const fs::path path = fs::path(a.out_dir) / (b.name + ".jsonl");
        auto out = open_output(path);
        for (const Record* r : by_batch.at(b.name))
            out << serialize_record(*r) << "\n";
        record_files.push_back(path);
    }
    const fs::path ledger_path = fs::path(a.out_dir) / "ledger.json";
    {
        auto out = open_output(ledger_path);
        out << result.ledger.to_json().dump(2) << "\n";
    }
    std::cerr << "campaign complete: " << result.records.size()
              << " accepted records across " << plan.batches.size()
              << " batches -> " << a.out_dir << "\n";
    for (const auto& [key, cell] : result.ledger.cells)
        std::cerr << "  " << key << ": attempts=" << cell.attempts
                  << " accepts=" << cell.accepts
                  << " exhausted=" << cell.retries_exhausted
                  << " yield=" << cell.yield() << "\n";

    manifest.set_config(plan_json);
    manifest.add_input(a.plan);
    for (const auto& p : data_inputs) manifest.add_input(p);
    for (const auto& p : record_files) manifest.add_output(p);
    manifest.add_output(ledger_path);
    manifest.add_output(journal);
    manifest.finished_at = utc_timestamp();
    manifest.write(fs::path(a.out_dir) / "manifest.json");
    return 0;
}

// ---- validate -------------------------------------------------------------

struct ValidateArgs {
    std::string rules, input, out = "-";
};

int run_validate(const ValidateArgs& a) {
    const ValidatorRuleSet rules = load_rule_set(a.rules);
    const auto records = load_records(a.input);

    std::ofstream file;
    const bool to_file = a.out != "-";
    if (to_file) file = open_output(a.out);
    std::ostream& out = to_file ? file : std::cout;

    std::size_t accepted = 0;
    for (const auto& r : records) {
        const ValidationVerdict v = validate_record(r, rules);
        if (v.accepted) ++accepted;
        nlohmann::json violations = nlohmann::json::array();
        for (const auto& viol : v.violations)
            violations.push_back({{"rule", viol.rule_id},
                                  {"span", viol.span},
                                  {"reason", viol.reason}});
        nlohmann::json j{{"id", r.id},
                         {"accepted", v.accepted},
                         {"violations", violations},
                         {"warnings", v.warnings}};
        out << j.dump() << "\n";
    }
    std::cerr << "validated " << records.size() << " records: " << accepted
              << " accepted, " << records.size() - accepted << " rejected\n";
    if (to_file) {
        file.close();
        RunManifest manifest;
        manifest.command = "validate";
        manifest.started_at = manifest.finished_at = utc_timestamp();
        manifest.set_config(nlohmann::json{{"rules", a.rules}});
        manifest.add_input(a.rules);
        manifest.add_input(a.input);
        manifest.add_output(a.out);
        manifest.write(manifest_path_for(a.out));
    }
    return 0;
}

// ---- stress-test ----------------------------------------------------------

struct StressArgs {
    std::string fixture, out;
    int seeds = 1;
};

ConfoundFixture load_fixture(const std::string& path) {
    ConfoundFixture f;
    if (path.empty()) return f;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    f.style_shift = j.value("style_shift", f.style_shift);
    f.content_shift = j.value("content_shift", f.content_shift);
    f.dim = j.value("dim", f.dim);
    f.n_safe = j.value("n_safe", f.n_safe);
    f.n_unsafe = j.value("n_unsafe", f.n_unsafe);
    f.n_borderline_train = j.value("n_borderline_train", f.n_borderline_train);
    f.n_borderline_eval = j.value("n_borderline_eval", f.n_borderline_eval);
    f.n_holdout = j.value("n_holdout", f.n_holdout);
    f.rotate = j.value("rotate", f.rotate);
    f.seed = j.value("seed", f.seed);
    f.check();
    return f;
}

int run_stress(const StressArgs& a) {
    RunManifest manifest;
    manifest.command = "stress-test";
    manifest.started_at = utc_timestamp();

    if (a.seeds < 1) throw ConfigError("stress-test: --seeds must be >= 1");
    ConfoundFixture f = load_fixture(a.fixture);
    const std::uint64_t base_seed = f.seed;

    nlohmann::json runs = nlohmann::json::array();
    std::cout << "seed  config      within-auroc  borderline-auroc  "
                 "borderline-fpr@tau\n";
    for (int s = 0; s < a.seeds; ++s) {
        f.seed = base_seed + static_cast<std::uint64_t>(s);
        const ConfoundGrid grid = run_confound_experiment(f);
        nlohmann::json cells = nlohmann::json::object();
        for (const auto& [tag, cell] : grid) {
            cells[tag] = {{"within", cell.within.to_json()},
                          {"borderline", cell.borderline.to_json()},
                          {"tau", cell.profile.tau},
                          {"theta_s", cell.profile.theta_s},
                          {"theta_u", cell.profile.theta_u}};
            char line[160];
            std::snprintf(line, sizeof(line),
                          "%-5llu %-11s %.4f        %.4f            %.4f\n",
                          static_cast<unsigned long long>(f.seed), tag.c_str(),
                          cell.within.auroc_value,
                          cell.borderline.auroc_value,
                          cell.borderline.fpr_at_tau);
            std::cout << line;
        }
        runs.push_back({{"seed", f.seed}, {"cells", cells}});
    }

    nlohmann::json doc{{"fixture",
                        {{"style_shift", f.style_shift},
                         {"content_shift", f.content_shift},
                         {"dim", f.dim},
                         {"n_safe", f.n_safe},
                         {"n_unsafe", f.n_unsafe},
                         {"n_borderline_train", f.n_borderline_train},
                         {"n_borderline_eval", f.n_borderline_eval},
                         {"n_holdout", f.n_holdout},
                         {"rotate", f.rotate},
                         {"base_seed", base_seed}}},
                       {"runs", runs}};
    auto out = open_output(a.out);
    out << doc.dump(2) << "\n";
    out.close();

    manifest.set_config(doc["fixture"]);
    if (!a.fixture.empty()) manifest.add_input(a.fixture);
    manifest.add_output(a.out);
    manifest.finished_at = utc_timestamp();
    manifest.write(manifest_path_for(a.out));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ctxguard: contextual-privacy guardrail pipeline"};
    app.set_config("--config", "",
                   "configuration file (INI/TOML sections per subcommand; "
                   "flags override file values)");
    int threads = 1;
    app.add_option("--threads", threads,
                   "internal parallelism budget (reductions stay deterministic)");
    bool dump_config = false;
    app.add_flag("--dump-config", dump_config,
                 "print the resolved configuration (all defaults) and exit");

    EmbedArgs embed_args;
    auto* embed = app.add_subcommand("embed", "fetch fused embeddings into a cache");
    embed->add_option("--input", embed_args.input, "record lines to embed")->required();
    embed->add_option("--stack", embed_args.stack, "encoder stack config (JSON)")->required();
    embed->add_option("--cache", embed_args.cache, "on-disk embedding cache")->required();
    embed->add_option("--out", embed_args.out, "output feature lines")->required();

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "fit a one-class density model");
    train->add_option("--features", train_args.features, "training feature lines")->required();
    train->add_option("--estimator", train_args.estimator, "gmm | ocsvm")
        ->check(CLI::IsMember({"gmm", "ocsvm"}));
    train->add_option("--out", train_args.out, "output model file")->required();
    train->add_option("--pca-dim", train_args.cfg.pca_dim, "PCA output dimension (GMM)");
    train->add_option("--components", train_args.cfg.gmm_components, "GMM mixture components");
    train->add_option("--nu-candidates", train_args.cfg.nu_candidates, "OCSVM nu sweep grid");
    train->add_option("--nu-folds", train_args.cfg.nu_sweep_folds, "OCSVM sweep folds");
    train->add_option("--nu-subsample", train_args.cfg.nu_sweep_subsample, "OCSVM sweep subsample");
    train->add_option("--gamma-subsample", train_args.cfg.gamma_subsample, "median-heuristic subsample");
    train->add_option("--seed", train_args.cfg.seed, "training seed");

    CalibrateArgs cal_args;
    auto* cal = app.add_subcommand("calibrate", "assemble and calibrate a detector profile");
    cal->add_option("--safe-model", cal_args.safe_model)->required();
    cal->add_option("--unsafe-model", cal_args.unsafe_model)->required();
    cal->add_option("--safe-holdout", cal_args.safe_holdout, "safe holdout features")->required();
    cal->add_option("--unsafe-holdout", cal_args.unsafe_holdout, "unsafe holdout features")->required();
    cal->add_option("--variant", cal_args.variant, "v3 | v4")
        ->check(CLI::IsMember({"v3", "v4"}));
    cal->add_option("--mode", cal_args.mode, "conservative | balanced | strict")
        ->check(CLI::IsMember({"conservative", "balanced", "strict"}));
    cal->add_option("--pos", cal_args.pos, "positive features for tau selection (balanced/strict)");
    cal->add_option("--percentile", cal_args.percentile, "abstain percentile");
    cal->add_option("--out", cal_args.out, "output profile file")->required();

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "three-way decisions for feature lines");
    score->add_option("--profile", score_args.profile)->required();
    score->add_option("--features", score_args.features)->required();
    score->add_option("--out", score_args.out, "output file, or - for stdout");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "kept-population metrics for one pairing");
    eval->add_option("--profile", eval_args.profile)->required();
    eval->add_option("--pairing", eval_args.pairing,
                     "within_distribution | cross_generator | borderline_stress");
    eval->add_option("--pos", eval_args.pos, "positive (unsafe) features")->required();
    eval->add_option("--neg", eval_args.neg, "negative (safe/borderline) features")->required();
    eval->add_flag("--grid", eval_args.grid, "include per-stratum breakdown");
    eval->add_option("--out", eval_args.out, "report JSON")->required();

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen", "run or resume a generation campaign");
    gen->add_option("--plan", gen_args.plan, "campaign plan (JSON)")->required();
    gen->add_option("--out-dir", gen_args.out_dir, "output directory")->required();
    gen->add_option("--data-dir", gen_args.data_dir,
                    "rules/seeds/templates root (default $CTXGUARD_DATA_DIR or ./data)");
    gen->add_flag("--resume", gen_args.resume, "continue an interrupted campaign journal");

    ValidateArgs val_args;
    auto* val = app.add_subcommand("validate", "verdict lines for record lines");
    val->add_option("--rules", val_args.rules, "rule-set file")->required();
    val->add_option("--input", val_args.input, "record lines")->required();
    val->add_option("--out", val_args.out, "output file, or - for stdout");

    StressArgs stress_args;
    auto* stress = app.add_subcommand("stress-test", "confound-lab ablation grid");
    stress->add_option("--fixture", stress_args.fixture, "fixture config (JSON)");
    stress->add_option("--seeds", stress_args.seeds, "number of seeds");
    stress->add_option("--out", stress_args.out, "grid report JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (dump_config) {
        std::cout << app.config_to_str(true, true);
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return 1;
    }

    try {
        if (*embed) return run_embed(embed_args);
        if (*train) return run_train(train_args);
        if (*cal) return run_calibrate(cal_args);
        if (*score) return run_score(score_args);
        if (*eval) return run_eval(eval_args);
        if (*gen) return run_gen(gen_args);
        if (*val) return run_validate(val_args);
        if (*stress) return run_stress(stress_args);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const EndpointError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << app.help();
    return 1;
}
