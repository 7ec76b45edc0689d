#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxguard/common.hpp"
#include "ctxguard/detector.hpp"
#include "ctxguard/metrics.hpp"

namespace ctxguard {

enum class PairingName { within_distribution, cross_generator, borderline_stress };

inline const char* to_string(PairingName p) {
    switch (p) {
        case PairingName::within_distribution: return "within_distribution";
        case PairingName::cross_generator: return "cross_generator";
        case PairingName::borderline_stress: return "borderline_stress";
    }
    return "?";
}
inline PairingName pairing_from_string(const std::string& s) {
    if (s == "within_distribution") return PairingName::within_distribution;
    if (s == "cross_generator") return PairingName::cross_generator;
    if (s == "borderline_stress") return PairingName::borderline_stress;
    throw ConfigError("unknown pairing: '" + s + "'");
}

// One record's scores under a fixed profile, plus an optional stratum key
// (borderline subtype or generator id).
struct ScoredItem {
    std::string id;
    double sigma_s = 0.0;
    double sigma_u = 0.0;
    std::string stratum;

    double delta() const { return sigma_u - sigma_s; }
};

struct StratumRow {
    std::size_t n = 0;
    double rate = std::numeric_limits<double>::quiet_NaN();  // NaN: too small
};

// Kept-population metrics for one (configuration, pairing) cell.
struct EvaluationReport {
    std::string config_tag;
    PairingName pairing = PairingName::within_distribution;
    std::size_t n_kept_pos = 0, n_kept_neg = 0;
    std::size_t n_abstain_pos = 0, n_abstain_neg = 0;
    double auroc_value = 0.0;
    double fpr95 = 0.0, fpr90 = 0.0;
    double tpr_at_tau = 0.0, fpr_at_tau = 0.0;
    std::map<std::string, StratumRow> strata;

    double abstain_rate_pos() const {
        return double(n_abstain_pos) / double(n_abstain_pos + n_kept_pos);
    }
    double abstain_rate_neg() const {
        return double(n_abstain_neg) / double(n_abstain_neg + n_kept_neg);
    }

    nlohmann::json to_json() const {
        nlohmann::json strata_j = nlohmann::json::object();
        for (const auto& [k, v] : strata) {
            nlohmann::json row{{"n", v.n}};
            if (!std::isnan(v.rate)) row["rate"] = v.rate;
            strata_j[k] = row;
        }
        return nlohmann::json{{"config", config_tag},
                              {"pairing", to_string(pairing)},
                              {"n_kept_pos", n_kept_pos},
                              {"n_kept_neg", n_kept_neg},
                              {"n_abstain_pos", n_abstain_pos},
                              {"n_abstain_neg", n_abstain_neg},
                              {"abstain_rate_pos", abstain_rate_pos()},
                              {"abstain_rate_neg", abstain_rate_neg()},
                              {"auroc", auroc_value},
                              {"fpr95", fpr95},
                              {"fpr90", fpr90},
                              {"tpr_at_tau", tpr_at_tau},
                              {"fpr_at_tau", fpr_at_tau},
                              {"strata", strata_j}};
    }
};

inline bool abstained(const DetectorProfile& p, const ScoredItem& s) {
    return s.sigma_s < p.theta_s && s.sigma_u < p.theta_u;
}

// Kept-population evaluation: abstained records are excluded from both the
// numerator and the denominator of every binary metric; abstain rates are
// reported per class independently.
inline EvaluationReport evaluate(const DetectorProfile& p, PairingName pairing,
                                 const std::vector<ScoredItem>& pos,
                                 const std::vector<ScoredItem>& neg) {
    EvaluationReport rep;
    rep.config_tag = p.config_tag();
    rep.pairing = pairing;

    std::vector<double> kept_pos, kept_neg;
    for (const auto& s : pos) {
        if (abstained(p, s)) ++rep.n_abstain_pos;
        else kept_pos.push_back(s.delta());
    }
    for (const auto& s : neg) {
        if (abstained(p, s)) ++rep.n_abstain_neg;
        else kept_neg.push_back(s.delta());
    }
    rep.n_kept_pos = kept_pos.size();
    rep.n_kept_neg = kept_neg.size();
    if (kept_pos.empty() || kept_neg.empty())
        throw NumericError("evaluate: insufficient kept records");

    rep.auroc_value = auroc(kept_pos, kept_neg);
    rep.fpr95 = fpr_at_tpr(kept_pos, kept_neg, 0.95);
    rep.fpr90 = fpr_at_tpr(kept_pos, kept_neg, 0.90);

    std::size_t tp = 0, fp = 0;
    for (double d : kept_pos)
        if (d > p.tau) ++tp;
    for (double d : kept_neg)
        if (d > p.tau) ++fp;
    rep.tpr_at_tau = double(tp) / double(kept_pos.size());
    rep.fpr_at_tau = double(fp) / double(kept_neg.size());
    return rep;
}

inline constexpr std::size_t kMinStratumDisplay = 10;

// Per-stratum flag rate at tau, full-population (no abstain filter); this is
// a per-subtype FPR over negatives or a per-generator TPR over positives,
// depending on which class the items carry. Strata with fewer than
// kMinStratumDisplay records report counts only.
inline std::map<std::string, StratumRow> stratify(
    const std::vector<ScoredItem>& items, double tau) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> acc;  // n, flagged
    for (const auto& s : items) {
        if (s.stratum.empty()) continue;
        auto& [n, flagged] = acc[s.stratum];
        ++n;
        if (s.delta() > tau) ++flagged;
    }
    std::map<std::string, StratumRow> out;
    for (const auto& [key, nf] : acc) {
        StratumRow row;
        row.n = nf.first;
        if (nf.first >= kMinStratumDisplay)
            row.rate = double(nf.second) / double(nf.first);
        out[key] = row;
    }
    return out;
}

}  // namespace ctxguard
