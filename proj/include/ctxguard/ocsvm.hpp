#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "ctxguard/common.hpp"
#include "ctxguard/pca.hpp"

namespace ctxguard {

// One-class SVM with RBF kernel, nu-parameterized, normalized dual
// (sum alpha = 1, 0 <= alpha_i <= 1/(nu*n)). Scores are signed distances
// from the decision boundary (larger = more in-distribution).
struct OcsvmModel {
    MatrixXd support_vectors;  // rows
    VectorXd alphas;
    double rho = 0.0;
    double gamma = 1.0;
    double nu = 0.5;
    PcaTransform preprocessing;

    // Caches support-vector squared norms so scoring is one matrix-vector
    // product. Called by fit/load; manually assembled models fall back to
    // the direct row loop until prepare() is called.
    void prepare() { sv_sq_cache = support_vectors.rowwise().squaredNorm(); }

    double score_reduced(const VectorXd& z) const {
        double acc = 0.0;
        if (sv_sq_cache.size() == support_vectors.rows() &&
            support_vectors.rows() > 0) {
            const VectorXd cross = support_vectors * z;
            const double zsq = z.squaredNorm();
            for (int i = 0; i < support_vectors.rows(); ++i) {
                const double d2 =
                    std::max(0.0, sv_sq_cache(i) + zsq - 2.0 * cross(i));
                acc += alphas(i) * std::exp(-gamma * d2);
            }
        } else {
            for (int i = 0; i < support_vectors.rows(); ++i) {
                const double d2 =
                    (support_vectors.row(i).transpose() - z).squaredNorm();
                acc += alphas(i) * std::exp(-gamma * d2);
            }
        }
        return acc - rho;
    }

    VectorXd sv_sq_cache;  // filled by prepare()

    double score(const VectorXd& x) const {
        return score_reduced(preprocessing.transform(x));
    }
};

// gamma = 1/(2 m^2), m = median pairwise Euclidean distance over a seeded
// uniform subsample of at most `subsample` rows.
inline double median_heuristic_gamma(const MatrixXd& data, int subsample,
                                     std::uint64_t seed) {
    const auto n = data.rows();
    if (n < 2) throw NumericError("median_heuristic_gamma: need at least 2 rows");
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);
    const int m_rows = static_cast<int>(std::min<Eigen::Index>(n, subsample));
    idx.resize(m_rows);
    std::sort(idx.begin(), idx.end());  // order-independent given the sample

    std::vector<double> dists;
    dists.reserve(std::size_t(m_rows) * (m_rows - 1) / 2);
    for (int a = 0; a < m_rows; ++a) {
        for (int b = a + 1; b < m_rows; ++b) {
            dists.push_back((data.row(idx[a]) - data.row(idx[b])).norm());
        }
    }
    std::sort(dists.begin(), dists.end());
    const std::size_t sz = dists.size();
    const double med = (sz % 2 == 1)
                           ? dists[sz / 2]
                           : 0.5 * (dists[sz / 2 - 1] + dists[sz / 2]);
    if (med <= 0.0)
        throw NumericError("median_heuristic_gamma: degenerate data for bandwidth selection");
    return 1.0 / (2.0 * med * med);
}

namespace detail {

// Lazy Gram-column cache for the SMO loop.
class KernelCache {
  public:
    KernelCache(const MatrixXd& X, double gamma) : X_(X), gamma_(gamma) {
        cols_.resize(X.rows());
        sq_ = X.rowwise().squaredNorm();
    }

    const VectorXd& col(int j) {
        if (cols_[j].size() == 0) {
            VectorXd c =
                (sq_.array() + sq_(j) - 2.0 * (X_ * X_.row(j).transpose()).array())
                    .cwiseMax(0.0);
            cols_[j] = (-gamma_ * c.array()).exp();
        }
        return cols_[j];
    }

  private:
    const MatrixXd& X_;
    double gamma_;
    VectorXd sq_;
    std::vector<VectorXd> cols_;
};

}  // namespace detail

// SMO (maximal-violating-pair) solver for the normalized one-class dual.
inline OcsvmModel fit_ocsvm(const MatrixXd& X, double nu, double gamma,
                            double kkt_tol = 1e-4,
                            std::int64_t max_iter = 1000000) {
    const auto n = X.rows();
    if (n < 2) throw NumericError("fit_ocsvm: need at least 2 rows");
    if (nu <= 0.0 || nu > 1.0) throw NumericError("fit_ocsvm: nu must be in (0, 1]");
    if (gamma <= 0.0) throw NumericError("fit_ocsvm: gamma must be positive");

    const double C = 1.0 / (nu * double(n));
    if (C * double(n) < 1.0 - 1e-12)
        throw NumericError("fit_ocsvm: infeasible box (nu * n < 1)");

    // init: first floor(nu*n) points at the upper bound, remainder on one point
    VectorXd alpha = VectorXd::Zero(n);
    {
        double remaining = 1.0;
        for (int i = 0; i < n && remaining > 0; ++i) {
            const double a = std::min(C, remaining);
            alpha(i) = a;
            remaining -= a;
        }
    }

    detail::KernelCache cache(X, gamma);

    // gradient G = Q alpha
    VectorXd G = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        if (alpha(i) > 0) G += alpha(i) * cache.col(i);
    }

    std::int64_t iter = 0;
    double gap = 0.0;
    for (; iter < max_iter; ++iter) {
        // maximal violating pair: i maximizes -G over alpha < C,
        // j minimizes -G over alpha > 0
        int i = -1, j = -1;
        double gmax = -std::numeric_limits<double>::infinity();
        double gmin = std::numeric_limits<double>::infinity();
        for (int t = 0; t < n; ++t) {
            if (alpha(t) < C - 1e-15 && -G(t) > gmax) { gmax = -G(t); i = t; }
            if (alpha(t) > 1e-15 && -G(t) < gmin) { gmin = -G(t); j = t; }
        }
        gap = gmax - gmin;
        if (i < 0 || j < 0 || gap < kkt_tol) break;

        const VectorXd& Qi = cache.col(i);
        const VectorXd& Qj = cache.col(j);
        double quad = Qi(i) + Qj(j) - 2.0 * Qi(j);
        if (quad <= 1e-12) quad = 1e-12;
        double delta = (G(j) - G(i)) / quad;
        delta = std::min(delta, C - alpha(i));
        delta = std::min(delta, alpha(j));
        if (delta <= 0) break;
        alpha(i) += delta;
        alpha(j) -= delta;
        G += delta * (Qi - Qj);
    }
    if (iter >= max_iter)
        throw NumericError("fit_ocsvm: no convergence after " +
                           std::to_string(max_iter) +
                           " iterations (KKT gap " + std::to_string(gap) + ")");

    // rho: median of (Q alpha)_i over margin vectors; fall back to the
    // midpoint of the active-bound gradients when no free vector exists
    std::vector<double> margin_vals;
    for (int t = 0; t < n; ++t) {
        if (alpha(t) > 1e-8 && alpha(t) < C - 1e-8) margin_vals.push_back(G(t));
    }
    double rho;
    if (!margin_vals.empty()) {
        std::sort(margin_vals.begin(), margin_vals.end());
        const std::size_t sz = margin_vals.size();
        rho = (sz % 2 == 1)
                  ? margin_vals[sz / 2]
                  : 0.5 * (margin_vals[sz / 2 - 1] + margin_vals[sz / 2]);
    } else {
        double ub = std::numeric_limits<double>::infinity();
        double lb = -std::numeric_limits<double>::infinity();
        for (int t = 0; t < n; ++t) {
            if (alpha(t) >= C - 1e-8) lb = std::max(lb, G(t));
            else if (alpha(t) <= 1e-8) ub = std::min(ub, G(t));
        }
        if (!std::isfinite(lb)) lb = ub;
        if (!std::isfinite(ub)) ub = lb;
        rho = 0.5 * (lb + ub);
    }

    OcsvmModel m;
    m.gamma = gamma;
    m.nu = nu;
    m.rho = rho;
    m.preprocessing = PcaTransform::identity(static_cast<int>(X.cols()));
    std::vector<int> sv;
    for (int t = 0; t < n; ++t)
        if (alpha(t) > 1e-8) sv.push_back(t);
    m.support_vectors.resize(static_cast<int>(sv.size()), X.cols());
    m.alphas.resize(static_cast<int>(sv.size()));
    for (std::size_t t = 0; t < sv.size(); ++t) {
        m.support_vectors.row(static_cast<int>(t)) = X.row(sv[t]);
        m.alphas(static_cast<int>(t)) = alpha(sv[t]);
    }
    m.prepare();
    return m;
}

struct NuSweepDiagnostics {
    std::vector<double> candidates;
    std::vector<double> rejection_rates;  // mean held-out same-class rejection
};

// 5-fold sweep: pick the candidate whose held-out rejection rate is closest
// to nu itself (ties to the smaller nu). Fold assignment is a seeded shuffle.
inline std::pair<double, NuSweepDiagnostics> sweep_nu(
    const MatrixXd& X, std::vector<double> candidates = {0.005, 0.01, 0.02, 0.05},
    int folds = 5, std::uint64_t seed = 0, int gamma_subsample = 2000) {
    const auto n = X.rows();
    if (candidates.empty()) throw NumericError("sweep_nu: empty candidate list");
    if (n < folds) throw NumericError("sweep_nu: fewer rows than folds");

    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);

    std::sort(candidates.begin(), candidates.end());
    NuSweepDiagnostics diag;
    diag.candidates = candidates;

    double best_nu = candidates.front();
    double best_obj = std::numeric_limits<double>::infinity();
    for (double nu : candidates) {
        double rejected = 0.0, held = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<int> train, test;
            for (std::size_t t = 0; t < idx.size(); ++t) {
                (static_cast<int>(t % folds) == f ? test : train).push_back(idx[t]);
            }
            MatrixXd Xtr(static_cast<int>(train.size()), X.cols());
            for (std::size_t t = 0; t < train.size(); ++t)
                Xtr.row(static_cast<int>(t)) = X.row(train[t]);
            const double gamma = median_heuristic_gamma(Xtr, gamma_subsample, seed);
            const OcsvmModel m = fit_ocsvm(Xtr, nu, gamma);
            for (int t : test) {
                held += 1.0;
                if (m.score_reduced(X.row(t).transpose()) < 0.0) rejected += 1.0;
            }
        }
        const double r = held > 0 ? rejected / held : 0.0;
        diag.rejection_rates.push_back(r);
        const double obj = std::abs(r - nu);
        if (obj < best_obj - 1e-12) {  // ties keep the smaller (earlier) nu
            best_obj = obj;
            best_nu = nu;
        }
    }
    return {best_nu, diag};
}

}  // namespace ctxguard
