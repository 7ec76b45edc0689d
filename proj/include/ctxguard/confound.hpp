#pragma once

// Desk-scale stand-in for the case-style confound: safe, unsafe and
// borderline point clouds differ only along a "style" and a "content" axis,
// with borderline matching unsafe on style and safe on content. The lab
// certifies the confound mechanism and its remediation, not corpus-scale
// magnitudes.

#include <map>
#include <string>
#include <vector>

#include "ctxguard/common.hpp"
#include "ctxguard/detector.hpp"
#include "ctxguard/evaluation.hpp"
#include "ctxguard/train.hpp"

namespace ctxguard {

struct ConfoundFixture {
    double style_shift = 5.0;
    double content_shift = 3.0;
    int dim = 16;  // style on axis 0, content on axis 1, rest unit noise
    int n_safe = 2000;
    int n_unsafe = 2000;
    int n_borderline_train = 400;
    int n_borderline_eval = 400;
    int n_holdout = 500;  // per-class within-distribution holdouts
    bool rotate = false;  // mix the signal axes through a random rotation
    std::uint64_t seed = 1;

    void check() const {
        if (style_shift < 0 || content_shift < 0)
            throw ConfigError("confound fixture: shifts must be non-negative");
        if (n_safe < 50 || n_unsafe < 50 || n_borderline_train < 50 ||
            n_borderline_eval < 50)
            throw ConfigError("confound fixture: counts must be >= 50");
        if (dim < 2) throw ConfigError("confound fixture: dim must be >= 2");
    }
};

struct ConfoundData {
    MatrixXd safe_train, unsafe_train;
    MatrixXd safe_holdout, unsafe_holdout;
    MatrixXd borderline_train, borderline_eval;
};

inline ConfoundData build_fixture(const ConfoundFixture& f) {
    f.check();
    Rng rng(f.seed);

    MatrixXd rot;
    if (f.rotate) {
        // QR of a random Gaussian matrix gives a uniform rotation
        MatrixXd g(f.dim, f.dim);
        for (int i = 0; i < f.dim; ++i)
            for (int j = 0; j < f.dim; ++j) g(i, j) = rng.normal();
        Eigen::HouseholderQR<MatrixXd> qr(g);
        rot = qr.householderQ();
    }

    auto cloud = [&](int n, double style, double content) {
        MatrixXd X(n, f.dim);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < f.dim; ++j) X(i, j) = rng.normal();
        X.col(0).array() += style;
        X.col(1).array() += content;
        if (f.rotate) X = X * rot.transpose();
        return X;
    };

    ConfoundData d;
    d.safe_train = cloud(f.n_safe, 0.0, 0.0);
    d.unsafe_train = cloud(f.n_unsafe, f.style_shift, f.content_shift);
    d.safe_holdout = cloud(f.n_holdout, 0.0, 0.0);
    d.unsafe_holdout = cloud(f.n_holdout, f.style_shift, f.content_shift);
    d.borderline_train = cloud(f.n_borderline_train, f.style_shift, 0.0);
    d.borderline_eval = cloud(f.n_borderline_eval, f.style_shift, 0.0);
    return d;
}

struct ConfoundCellResult {
    DetectorProfile profile;
    EvaluationReport within;
    EvaluationReport borderline;
};

using ConfoundGrid = std::map<std::string, ConfoundCellResult>;

namespace detail {

inline std::vector<ScoredItem> score_items(const DetectorProfile& p,
                                           const MatrixXd& X,
                                           const std::string& prefix) {
    std::vector<ScoredItem> out;
    out.reserve(X.rows());
    for (int i = 0; i < X.rows(); ++i) {
        const VectorXd x = X.row(i).transpose();
        out.push_back({prefix + std::to_string(i), p.safe_model.score(x),
                       p.unsafe_model.score(x), ""});
    }
    return out;
}

}  // namespace detail

// Trains all four (estimator x safe-data) cells and evaluates the
// within-distribution and borderline pairings at tau = 0. The unsafe-side
// model is shared between the v3 and v4 cells of each estimator.
inline ConfoundGrid run_confound_experiment(const ConfoundFixture& f) {
    const ConfoundData d = build_fixture(f);

    TrainConfig cfg;
    cfg.pca_dim = 8;  // small-scale stand-in for the 512-dim reduction
    cfg.seed = f.seed;

    MatrixXd safe_v4(d.safe_train.rows() + d.borderline_train.rows(), f.dim);
    safe_v4 << d.safe_train, d.borderline_train;

    ConfoundGrid grid;
    for (ScoreKind kind : {ScoreKind::gmm_loglik, ScoreKind::ocsvm_signed_distance}) {
        const DensityModel unsafe_model =
            train_density_model(d.unsafe_train, kind, cfg);
        for (SafeVariant variant : {SafeVariant::v3, SafeVariant::v4}) {
            DetectorProfile p;
            p.estimator = kind;
            p.variant = variant;
            p.safe_model = train_density_model(
                variant == SafeVariant::v3 ? d.safe_train : safe_v4, kind, cfg);
            p.unsafe_model = unsafe_model;
            p.tau = 0.0;
            p.provenance = {"fixture-safe-holdout", "fixture-unsafe-holdout", 5.0};

            std::vector<double> safe_ho_s, unsafe_ho_u;
            for (int i = 0; i < d.safe_holdout.rows(); ++i)
                safe_ho_s.push_back(p.safe_model.score(d.safe_holdout.row(i).transpose()));
            for (int i = 0; i < d.unsafe_holdout.rows(); ++i)
                unsafe_ho_u.push_back(
                    p.unsafe_model.score(d.unsafe_holdout.row(i).transpose()));
            std::tie(p.theta_s, p.theta_u) =
                calibrate_abstain(safe_ho_s, unsafe_ho_u, 5.0);

            const auto pos = detail::score_items(p, d.unsafe_holdout, "u");
            const auto neg_within = detail::score_items(p, d.safe_holdout, "s");
            const auto neg_borderline = detail::score_items(p, d.borderline_eval, "b");

            ConfoundCellResult cell;
            cell.within =
                evaluate(p, PairingName::within_distribution, pos, neg_within);
            cell.borderline =
                evaluate(p, PairingName::borderline_stress, pos, neg_borderline);
            cell.profile = std::move(p);
            grid.emplace(cell.profile.config_tag(), std::move(cell));
        }
    }
    return grid;
}

}  // namespace ctxguard
