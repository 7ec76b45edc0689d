#pragma once

#include <cstdint>

#include "ctxguard/detector.hpp"
#include "ctxguard/gmm.hpp"
#include "ctxguard/ocsvm.hpp"
#include "ctxguard/pca.hpp"

namespace ctxguard {

struct TrainConfig {
    int pca_dim = 512;
    int gmm_components = 8;
    std::vector<double> nu_candidates = {0.005, 0.01, 0.02, 0.05};
    int nu_sweep_folds = 5;
    // The sweep refits one model per candidate per fold; on large corpora it
    // runs on a seeded subsample of this many rows.
    int nu_sweep_subsample = 500;
    int gamma_subsample = 2000;
    std::uint64_t seed = 0;
};

// Fits one one-class density model on its own training data.
// GMM: per-model PCA to pca_dim, then full-covariance EM.
// OCSVM: raw features, median-heuristic gamma, nu from the 5-fold sweep.
inline DensityModel train_density_model(const MatrixXd& data, ScoreKind kind,
                                        const TrainConfig& cfg) {
    DensityModel out;
    if (kind == ScoreKind::gmm_loglik) {
        const int dim = std::min<int>(cfg.pca_dim,
                                      std::min<int>(static_cast<int>(data.rows()) - 1,
                                                    static_cast<int>(data.cols())));
        PcaTransform pca = fit_pca(data, dim);
        GmmModel g = fit_gmm(pca.transform_rows(data), cfg.gmm_components, cfg.seed);
        g.preprocessing = pca;
        out.impl = std::move(g);
    } else {
        MatrixXd sub = data;
        if (data.rows() > cfg.nu_sweep_subsample) {
            std::vector<int> idx(data.rows());
            std::iota(idx.begin(), idx.end(), 0);
            Rng rng(cfg.seed ^ 0x5eedULL);
            rng.shuffle(idx);
            sub.resize(cfg.nu_sweep_subsample, data.cols());
            for (int i = 0; i < cfg.nu_sweep_subsample; ++i)
                sub.row(i) = data.row(idx[i]);
        }
        const auto [nu, diag] =
            sweep_nu(sub, cfg.nu_candidates, cfg.nu_sweep_folds, cfg.seed,
                     cfg.gamma_subsample);
        (void)diag;
        const double gamma = median_heuristic_gamma(data, cfg.gamma_subsample, cfg.seed);
        out.impl = fit_ocsvm(data, nu, gamma);
    }
    return out;
}

}  // namespace ctxguard
