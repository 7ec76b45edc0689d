#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "ctxguard/common.hpp"
#include "ctxguard/gmm.hpp"
#include "ctxguard/metrics.hpp"
#include "ctxguard/ocsvm.hpp"

namespace ctxguard {

enum class ScoreKind { gmm_loglik, ocsvm_signed_distance };

inline const char* to_string(ScoreKind k) {
    return k == ScoreKind::gmm_loglik ? "gmm" : "ocsvm";
}
inline ScoreKind score_kind_from_string(const std::string& s) {
    if (s == "gmm") return ScoreKind::gmm_loglik;
    if (s == "ocsvm") return ScoreKind::ocsvm_signed_distance;
    throw ConfigError("unknown estimator kind: '" + s + "'");
}

enum class SafeVariant { v3, v4 };

inline const char* to_string(SafeVariant v) {
    return v == SafeVariant::v3 ? "v3" : "v4";
}
inline SafeVariant safe_variant_from_string(const std::string& s) {
    if (s == "v3") return SafeVariant::v3;
    if (s == "v4") return SafeVariant::v4;
    throw ConfigError("unknown safe variant: '" + s + "'");
}

// A trained one-class scorer with its preprocessing baked in.
struct DensityModel {
    std::variant<GmmModel, OcsvmModel> impl;

    ScoreKind kind() const {
        return std::holds_alternative<GmmModel>(impl)
                   ? ScoreKind::gmm_loglik
                   : ScoreKind::ocsvm_signed_distance;
    }
    double score(const VectorXd& x) const {
        return std::visit([&](const auto& m) { return m.score(x); }, impl);
    }
    int input_dim() const {
        return std::visit(
            [](const auto& m) { return m.preprocessing.input_dim(); }, impl);
    }
};

struct ScoreScalar {
    double value = 0.0;
    ScoreKind kind = ScoreKind::gmm_loglik;
};

struct CalibrationProvenance {
    std::string safe_dataset;
    std::string unsafe_dataset;
    double percentile = 5.0;
};

// The deployable pair (safe model, unsafe model) plus thresholds.
struct DetectorProfile {
    DensityModel safe_model;
    DensityModel unsafe_model;
    double tau = 0.0;
    double theta_s = -std::numeric_limits<double>::infinity();
    double theta_u = -std::numeric_limits<double>::infinity();
    ScoreKind estimator = ScoreKind::gmm_loglik;
    SafeVariant variant = SafeVariant::v3;
    CalibrationProvenance provenance;

    std::string config_tag() const {
        return std::string(to_string(estimator)) + "_" + to_string(variant);
    }

    void check() const {
        if (safe_model.kind() != unsafe_model.kind())
            throw ConfigError("detector profile: heterogeneous score kinds");
        if (safe_model.kind() != estimator)
            throw ConfigError("detector profile: estimator tag does not match models");
    }
};

enum class Outcome { flag, safe, abstain };

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::flag: return "flag";
        case Outcome::safe: return "safe";
        case Outcome::abstain: return "abstain";
    }
    return "?";
}

struct Decision {
    Outcome outcome = Outcome::safe;
    double delta = 0.0;
    double sigma_s = 0.0;
    double sigma_u = 0.0;
};

// Three-way decision from precomputed scores. The abstain gate is evaluated
// first; flag requires delta strictly above tau.
inline Decision decide_scores(const DetectorProfile& p, double sigma_s,
                              double sigma_u) {
    Decision d;
    d.sigma_s = sigma_s;
    d.sigma_u = sigma_u;
    d.delta = sigma_u - sigma_s;
    if (sigma_s < p.theta_s && sigma_u < p.theta_u) {
        d.outcome = Outcome::abstain;
    } else {
        d.outcome = d.delta > p.tau ? Outcome::flag : Outcome::safe;
    }
    return d;
}

inline Decision decide(const DetectorProfile& p, const VectorXd& x) {
    p.check();
    return decide_scores(p, p.safe_model.score(x), p.unsafe_model.score(x));
}

// theta = nearest-rank percentile of each holdout's own-model scores.
// Thresholds are frozen afterwards for all pairings.
inline std::pair<double, double> calibrate_abstain(
    const std::vector<double>& safe_holdout_sigma_s,
    const std::vector<double>& unsafe_holdout_sigma_u, double percentile = 5.0) {
    if (safe_holdout_sigma_s.empty() || unsafe_holdout_sigma_u.empty())
        throw NumericError("calibrate_abstain: empty holdout scores");
    return {nearest_rank_percentile(safe_holdout_sigma_s, percentile),
            nearest_rank_percentile(unsafe_holdout_sigma_u, percentile)};
}

enum class OperatingMode { conservative, balanced, strict };

inline OperatingMode operating_mode_from_string(const std::string& s) {
    if (s == "conservative") return OperatingMode::conservative;
    if (s == "balanced") return OperatingMode::balanced;
    if (s == "strict") return OperatingMode::strict;
    throw ConfigError("unknown operating mode: '" + s + "'");
}

// conservative: tau = 0. balanced/strict: largest tau whose kept-population
// TPR (flag iff delta > tau) is >= 0.90 / 0.95.
inline double select_operating_point(OperatingMode mode,
                                     const std::vector<double>& pos_delta,
                                     const std::vector<double>& neg_delta = {}) {
    if (mode == OperatingMode::conservative) return 0.0;
    if (pos_delta.empty())
        throw NumericError("select_operating_point: no positive scores");
    const double target = mode == OperatingMode::balanced ? 0.90 : 0.95;

    std::vector<double> candidates;
    for (double s : pos_delta)
        candidates.push_back(std::nextafter(s, -std::numeric_limits<double>::infinity()));
    for (double s : neg_delta)
        candidates.push_back(std::nextafter(s, -std::numeric_limits<double>::infinity()));
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());

    std::vector<double> sp = pos_delta;
    std::sort(sp.begin(), sp.end());
    double best = candidates.front();
    bool found = false;
    for (double t : candidates) {
        const auto npos = sp.end() - std::upper_bound(sp.begin(), sp.end(), t);
        const double tpr = double(npos) / double(sp.size());
        if (tpr + 1e-12 >= target) { best = t; found = true; }
    }
    if (!found)
        throw NumericError("select_operating_point: target TPR unattainable");
    return best;
}

}  // namespace ctxguard
